//! Scripts for the simulator, and a seeded generator of random ones.
//!
//! Script files hold one action per line, `step actor action args`:
//!
//! ```text
//! # comments and blank lines are ignored
//! 0  alice login
//! 5  alice add bob@a.mail
//! 10 alice send bob@A hello there
//! 11 alice send_unchecked ghost@A this one bounces
//! 20 net   kill_relay A.r2
//! 20 net   drop_next_frame * client:bob@A
//! 30 bob   logout
//! ```

use std::collections::BTreeMap;
use std::fmt;

use rand::distributions::Alphanumeric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::addr::{Address, EndpointId};

use super::{SimError, SimUser};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Login,
    Logout,
    Add { email: String },
    /// `checked` false skips the client's buddy-list check.
    Send { to: Address, body: String, checked: bool },
    KillRelay { node: String },
    /// `from` of `None` matches any sender.
    DropNextFrame { from: Option<EndpointId>, to: EndpointId },
}

impl Action {
    pub fn is_client_action(&self) -> bool {
        !matches!(self, Action::KillRelay { .. } | Action::DropNextFrame { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptAction {
    pub step: u64,
    pub actor: String,
    pub action: Action,
}

impl fmt::Display for ScriptAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.step, self.actor)?;
        match &self.action {
            Action::Login => f.write_str("login"),
            Action::Logout => f.write_str("logout"),
            Action::Add { email } => write!(f, "add {email}"),
            Action::Send { to, body, checked: true } => write!(f, "send {to} {body}"),
            Action::Send { to, body, checked: false } => write!(f, "send_unchecked {to} {body}"),
            Action::KillRelay { node } => write!(f, "kill_relay {node}"),
            Action::DropNextFrame { from, to } => match from {
                Some(from) => write!(f, "drop_next_frame {from} {to}"),
                None => write!(f, "drop_next_frame * {to}"),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub actions: Vec<ScriptAction>,
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: u64, actor: &str, action: Action) -> &mut Self {
        self.actions.push(ScriptAction {
            step,
            actor: actor.to_string(),
            action,
        });
        self
    }

    /// Bodies of every send in the script.
    pub fn bodies(&self) -> Vec<&str> {
        self.actions
            .iter()
            .filter_map(|a| match &a.action {
                Action::Send { body, .. } => Some(body.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.actions.iter().map(|a| format!("{a}\n")).collect()
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let mut scenario = Scenario::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| SimError::Scenario { line: i + 1, reason };
        let mut words = line.split_whitespace();
        let step = words
            .next()
            .and_then(|w| w.parse::<u64>().ok())
            .ok_or_else(|| err("expected a step number".into()))?;
        let actor = words.next().ok_or_else(|| err("missing actor".into()))?;
        let action = words.next().ok_or_else(|| err("missing action".into()))?;
        // Everything after the action word, inner whitespace preserved.
        let args = strip_prefix_words(line, 3).unwrap_or("");
        let argv: Vec<&str> = args.split_whitespace().collect();

        let parsed = match action {
            "login" if argv.is_empty() => Action::Login,
            "logout" if argv.is_empty() => Action::Logout,
            "add" if argv.len() == 1 => Action::Add {
                email: argv[0].to_string(),
            },
            "send" | "send_unchecked" if !argv.is_empty() => {
                let (to, body) = args.split_once(char::is_whitespace).unwrap_or((args, ""));
                Action::Send {
                    to: to.parse().map_err(|e| err(format!("{e}")))?,
                    body: body.trim_start().to_string(),
                    checked: action == "send",
                }
            }
            "kill_relay" if argv.len() == 1 => Action::KillRelay {
                node: argv[0].to_string(),
            },
            "drop_next_frame" if argv.len() == 2 => Action::DropNextFrame {
                from: (argv[0] != "*").then(|| EndpointId::new(argv[0])),
                to: EndpointId::new(argv[1]),
            },
            other => return Err(err(format!("bad action {other:?} with {} argument(s)", argv.len()))),
        };
        scenario.push(step, actor, parsed);
    }
    Ok(scenario)
}

/// The remainder of `line` after skipping `n` whitespace-separated words.
fn strip_prefix_words(line: &str, n: usize) -> Option<&str> {
    let mut rest = line.trim_start();
    for _ in 0..n {
        let end = rest.find(char::is_whitespace)?;
        rest = rest[end..].trim_start();
    }
    Some(rest)
}

pub const BODY_LEN: usize = 32;

/// A random script over the first two agencies: everyone logs in and adds
/// everyone else, then 10 to 50 messages follow, each picking one of the
/// flows A→A, A→B, B→B, B→A uniformly and carrying a fresh 32-character
/// alphanumeric body. About one message in ten goes to a nonexistent local
/// user instead and must bounce.
pub fn random_scenario(users: &[SimUser], seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut by_agency: BTreeMap<&str, Vec<&SimUser>> = BTreeMap::new();
    for u in users {
        by_agency.entry(u.address.agency()).or_default().push(u);
    }
    let agencies: Vec<&str> = by_agency.keys().copied().take(2).collect();
    let flows: Vec<(&str, &str)> = match agencies[..] {
        [a] => vec![(a, a)],
        [a, b] => vec![(a, a), (a, b), (b, b), (b, a)],
        _ => Vec::new(),
    };

    let mut s = Scenario::new();
    for u in users {
        s.push(0, &u.name, Action::Login);
    }
    for u in users {
        for other in users.iter().filter(|o| o.name != u.name) {
            s.push(
                1,
                &u.name,
                Action::Add {
                    email: other.email.clone(),
                },
            );
        }
    }
    if flows.is_empty() {
        return s;
    }

    let count = rng.gen_range(10..=50);
    let mut step = 10;
    for _ in 0..count {
        let (src, dst) = flows[rng.gen_range(0..flows.len())];
        let senders = &by_agency[src];
        let sender = senders[rng.gen_range(0..senders.len())];
        let candidates: Vec<&&SimUser> = by_agency[dst].iter().filter(|u| u.name != sender.name).collect();
        let body: String = (&mut rng).sample_iter(Alphanumeric).take(BODY_LEN).map(char::from).collect();
        let action = if rng.gen_ratio(1, 10) {
            Action::Send {
                to: Address::new("ghost", src).expect("valid"),
                body,
                checked: false,
            }
        } else {
            let recipient = if candidates.is_empty() {
                sender
            } else {
                candidates[rng.gen_range(0..candidates.len())]
            };
            Action::Send {
                to: recipient.address.clone(),
                body,
                checked: true,
            }
        };
        s.push(step, &sender.name, action);
        step += rng.gen_range(0..8);
    }
    s
}
