//! The `client` executable, driven through its stdin.

mod common;

use std::path::Path;
use std::process::Stdio;

use common::{Mesh, WAIT};
use tokio::io::AsyncWriteExt;
use tokio::process::Command;

async fn run_client(server: &str, home: &Path, script: &str) -> (i32, String) {
    let mut child = Command::new(env!("CARGO_BIN_EXE_client"))
        .args(["--server", server])
        .env("RELAYMESH_HOME", home)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    stdin.write_all(script.as_bytes()).await.unwrap();
    drop(stdin);
    let out = tokio::time::timeout(WAIT, child.wait_with_output())
        .await
        .expect("client exits")
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    (out.status.code().unwrap_or(-1), text)
}

#[tokio::test]
async fn unreachable_server_exits_3() {
    let home = tempfile::tempdir().unwrap();
    // Bind then drop, so nothing listens on the port.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let (code, text) = run_client(&port.to_string(), home.path(), "").await;
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("|  _ \\"), "banner missing: {text}");
    assert!(text.contains("login or register?"));
    assert!(text.contains("cannot connect"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn scripted_session_then_pin_mismatch() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let home = mesh.home("alice");

    let (code, text) = run_client(
        &a,
        &home,
        "register alice alice@a.mail correct-horse\nlogin alice correct-horse\nbuddies\nquit\n",
    )
    .await;
    assert_eq!(code, 0, "{text}");
    let banner = text.find("login or register?").unwrap();
    let pinned = text.find("pinned server key").unwrap();
    let logged_in = text.find("logged in as alice@A").unwrap();
    assert!(banner < pinned && pinned < logged_in, "{text}");
    assert!(home.join("alice.skey").exists());

    let known = std::fs::read_to_string(home.join("known_servers")).unwrap();
    assert_eq!(known.trim(), format!("{a} {}", mesh.agency("A").server.public_key.to_hex()));

    // Second run matches the pin.
    let (code, text) = run_client(&a, &home, "login alice correct-horse\n").await;
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("matches pin"), "{text}");

    // A different key under the same address aborts before any login.
    std::fs::write(home.join("known_servers"), format!("{a} {}\n", "11".repeat(32))).unwrap();
    let (code, text) = run_client(&a, &home, "login alice correct-horse\n").await;
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("WARNING"), "{text}");
    assert!(!text.contains("logged in"), "{text}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn bad_password_exits_2() {
    let mesh = Mesh::start().await;
    let a = mesh.agency("A").server_addr.clone();
    let home = mesh.home("bob");
    let (code, _) = run_client(&a, &home, "register bob bob@a.mail correct-horse\n").await;
    assert_eq!(code, 0);
    let (code, text) = run_client(&a, &home, "login bob nope-nope-nope\nbuddies\n").await;
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("error(1): "), "{text}");
}
