//! Letters over real sockets: CLI clients, both agencies, every flow.

mod common;

use common::{Cli, Mesh};
use relaymesh_core::server::Leg;
use relaymesh_node::cli::Exit;

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn four_flows_over_tcp() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let b = mesh.agency("B").server_addr.clone();

    let bob = Cli::sign_up(&a, &mesh.home("bob"), "bob", "bob@a.mail").await;
    let dave = Cli::sign_up(&b, &mesh.home("dave"), "dave", "dave@b.mail").await;
    let erin = Cli::sign_up(&b, &mesh.home("erin"), "erin", "erin@b.mail").await;
    let alice = Cli::sign_up(&a, &mesh.home("alice"), "alice", "alice@a.mail").await;

    alice.type_line("add bob@a.mail");
    alice.type_line("add dave@b.mail");
    alice.expect("added dave@B").await;
    alice.type_line("send bob@A see you at the standup");
    alice.type_line("send dave@B cross agency hello");
    bob.expect("alice@A: see you at the standup").await;
    dave.expect("alice@A: cross agency hello").await;
    alice.expect("alice@A -> dave@B: cross agency hello").await;

    dave.type_line("add erin@b.mail");
    dave.type_line("add alice@a.mail");
    dave.expect("added alice@A").await;
    dave.type_line("send erin@B inside B");
    dave.type_line("send alice@A back to A");
    erin.expect("dave@B: inside B").await;
    alice.expect("dave@B: back to A").await;

    // Each letter shows up once, and nothing else leaked onto screens.
    assert_eq!(bob.count("see you at the standup"), 1);
    assert!(!bob.screen.text().contains("cross agency hello"));

    let audit_a = mesh.audit("A").await;
    let audit_b = mesh.audit("B").await;
    let bodies = |recs: &[relaymesh_core::server::AuditRecord]| {
        let mut v: Vec<String> = recs.iter().map(|r| r.body.clone()).collect();
        v.sort();
        v
    };
    assert_eq!(
        bodies(&audit_a),
        ["back to A", "cross agency hello", "see you at the standup"]
    );
    assert_eq!(bodies(&audit_b), ["back to A", "cross agency hello", "inside B"]);
    assert_eq!(audit_b.iter().filter(|r| r.leg == Leg::FederatedIngress).count(), 1);

    // The audit log on disk agrees with memory.
    let on_disk = std::fs::read_to_string(mesh.agency("A").data_dir.join("audit.log")).unwrap();
    assert_eq!(on_disk.lines().count(), 3);

    for c in [alice, bob, dave, erin] {
        let (code, _) = c.finish().await;
        assert_eq!(code, Exit::Normal);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn offline_recipient_gets_letters_on_login() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let b = mesh.agency("B").server_addr.clone();

    let carol = Cli::sign_up(&b, &mesh.home("carol"), "carol", "carol@b.mail").await;
    let (code, _) = carol.finish().await;
    assert_eq!(code, Exit::Normal);

    let alice = Cli::sign_up(&a, &mesh.home("alice"), "alice", "alice@a.mail").await;
    alice.type_line("add carol@b.mail");
    alice.type_line("buddies");
    alice.expect("carol@B [offline]").await;
    alice.type_line("send carol@B first");
    alice.type_line("send carol@B second");
    alice.expect("-> carol@B: second").await;

    let carol = Cli::start(&b, &mesh.home("carol"));
    carol.type_line("login carol correct-horse");
    carol.expect("alice@A: second").await;
    let text = carol.screen.text();
    assert!(text.find("alice@A: first").unwrap() < text.find("alice@A: second").unwrap());
    carol.finish().await;
    alice.finish().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn errors_reach_the_sender() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();

    let alice = Cli::start(&a, &mesh.home("alice"));
    alice.expect("login or register?").await;
    alice.type_line("send bob@A too early");
    alice.expect("error: not logged in").await;

    alice.type_line("register alice alice@a.mail short");
    alice.expect("error(7)").await;
    alice.type_line("register alice alice@a.mail correct-horse");
    alice.type_line("login alice correct-horse");
    alice.expect("logged in as alice@A").await;
    alice.type_line("send bob@A not a buddy");
    alice.expect("error: bob@A is not in your buddy list").await;
    alice.type_line("add nobody@z.mail");
    alice.expect("error(").await;
    alice.type_line("dance");
    alice.expect("unknown command").await;

    let (code, _) = alice.finish().await;
    assert_eq!(code, Exit::Normal);
    assert!(mesh.audit("A").await.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn wrong_password_exits_with_auth_failure() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let alice = Cli::sign_up(&a, &mesh.home("alice"), "alice", "alice@a.mail").await;
    alice.finish().await;

    let again = Cli::start(&a, &mesh.home("alice"));
    again.type_line("login alice wrong-password");
    let (code, text) = again.finish().await;
    assert_eq!(code, Exit::Auth, "{text}");
    assert!(text.contains("error(1)"), "{text}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn prompts_for_missing_fields() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let c = Cli::start(&a, &mesh.home("zed"));
    c.type_line("register");
    c.type_line("zed");
    c.type_line("zed@a.mail");
    c.type_line("long-enough-pw");
    c.type_line("login zed");
    c.type_line("long-enough-pw");
    c.expect("logged in as zed@A").await;
    let text = c.screen.text();
    for p in ["user?", "email?", "password?"] {
        assert!(text.contains(p), "{text}");
    }
    assert!(mesh.home("zed").join("zed.skey").exists());
    c.finish().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn lost_connection_offers_reconnect() {
    let mut mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let alice = Cli::sign_up(&a, &mesh.home("alice"), "alice", "alice@a.mail").await;

    drop(mesh.agencies.remove("A"));
    alice.expect("connection lost. reconnect? [y/n]").await;
    alice.type_line("n");
    let (code, _) = alice.finish().await;
    assert_eq!(code, Exit::Connection);
}
