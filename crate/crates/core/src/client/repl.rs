//! Command grammar and output formatting for the interactive client.

use crate::addr::Address;
use crate::crypto::PlaintextLetter;
use crate::node::iso8601;
use crate::wire::RosterItem;

pub const BANNER: &str = r"
  ____      _             __  __           _
 |  _ \ ___| | __ _ _   _|  \/  | ___  ___| |__
 | |_) / _ \ |/ _` | | | | |\/| |/ _ \/ __| '_ \
 |  _ <  __/ | (_| | |_| | |  | |  __/\__ \ | | |
 |_| \_\___|_|\__,_|\__, |_|  |_|\___||___/_| |_|
                    |___/
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    /// Missing fields are prompted for.
    Register {
        user: Option<String>,
        email: Option<String>,
        password: Option<String>,
    },
    Login {
        user: Option<String>,
        password: Option<String>,
    },
    Buddies,
    Add { email: String },
    Send { to: Address, text: String },
    Help,
    Quit,
    Empty,
}

pub const HELP: &str = "commands: register [user email password] | login [user password] | buddies | \
                        add <email> | send <user@agency> <text> | quit";

/// ```text
/// register [user email password]
/// login [user password]
/// buddies
/// add <email>
/// send <user@agency> <text...>
/// quit
/// ```
pub fn parse_command(line: &str) -> Result<Command, String> {
    let line = line.trim();
    let (word, rest) = match line.split_once(char::is_whitespace) {
        Some((w, r)) => (w, r.trim_start()),
        None => (line, ""),
    };
    let args: Vec<&str> = rest.split_whitespace().collect();
    let arg = |i: usize| args.get(i).map(|s| s.to_string());
    match word {
        "" => Ok(Command::Empty),
        "register" if args.len() <= 3 => Ok(Command::Register {
            user: arg(0),
            email: arg(1),
            password: arg(2),
        }),
        "login" if args.len() <= 2 => Ok(Command::Login {
            user: arg(0),
            password: arg(1),
        }),
        "buddies" if args.is_empty() => Ok(Command::Buddies),
        "add" if args.len() == 1 => Ok(Command::Add {
            email: args[0].to_string(),
        }),
        "send" => {
            let (to, text) = match rest.split_once(char::is_whitespace) {
                Some((to, text)) => (to, text.trim_start()),
                None if !rest.is_empty() => (rest, ""),
                None => return Err("usage: send <user@agency> <text>".into()),
            };
            let to = to.parse().map_err(|e| format!("{e}"))?;
            Ok(Command::Send {
                to,
                text: text.to_string(),
            })
        }
        "help" | "?" => Ok(Command::Help),
        "quit" | "exit" => Ok(Command::Quit),
        "register" | "login" | "buddies" | "add" => Err(format!("wrong arguments to {word}; {HELP}")),
        other => Err(format!("unknown command {other:?}; {HELP}")),
    }
}

/// `[<ts>] <sender>: <body>`
pub fn format_incoming(letter: &PlaintextLetter) -> String {
    format!("[{}] {}: {}", iso8601(letter.sent_at), letter.sender, letter.body)
}

/// `error(<code>): <message>`, without any reference suffix.
pub fn format_error(code: u16, message: &str) -> String {
    format!("error({code}): {}", strip_ref(message))
}

pub fn strip_ref(message: &str) -> &str {
    match message.rfind(" [ref=") {
        Some(i) if message.ends_with(']') => &message[..i],
        _ => message,
    }
}

/// `bob@A [online]`
pub fn format_roster_item(item: &RosterItem) -> String {
    format!(
        "{} [{}]",
        item.address,
        if item.online { "online" } else { "offline" }
    )
}
