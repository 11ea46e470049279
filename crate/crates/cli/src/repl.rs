//! Line-oriented interactive session.

use std::io::{BufRead, Write};

use attentive_core::agent::Session;
use attentive_core::Scene;

pub const USAGE: &str = "usage: speaker>listener: text | :scene | :quit";

/// `Felix>Daniel: Give me the red glass.` -> `("Felix", "Daniel", "Give me the red glass.")`
pub fn parse_line(line: &str) -> Option<(&str, &str, &str)> {
    let (head, text) = line.split_once(':')?;
    let (speaker, listener) = head.split_once('>')?;
    let (speaker, listener, text) = (speaker.trim(), listener.trim(), text.trim());
    if speaker.is_empty() || listener.is_empty() || text.is_empty() {
        return None;
    }
    Some((speaker, listener, text))
}

/// Lines of `after` missing from `before` (`+`) and the reverse (`-`).
fn diff(before: &str, after: &str) -> Vec<String> {
    let old: Vec<&str> = before.lines().collect();
    let new: Vec<&str> = after.lines().collect();
    let mut out: Vec<String> = old.iter().filter(|l| !new.contains(l)).map(|l| format!("  - {l}")).collect();
    out.extend(new.iter().filter(|l| !old.contains(l)).map(|l| format!("  + {l}")));
    out
}

pub fn run(session: &mut Session, input: impl BufRead, out: &mut impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        match line {
            "" => continue,
            ":quit" => break,
            ":scene" => {
                write!(out, "{}", session.scene.describe())?;
                continue;
            }
            _ => {}
        }
        let Some((speaker, listener, text)) = parse_line(line) else {
            writeln!(out, "{USAGE}")?;
            continue;
        };
        let mut shown = session.scene.describe();
        let mut revision = session.scene.revision();
        let mut failed = None;
        let mut print = |event: &attentive_core::agent::TraceEvent, scene: &Scene| {
            if failed.is_some() {
                return;
            }
            let mut block = vec![format!("  {}", event.render())];
            if scene.revision() != revision {
                let now = scene.describe();
                block.extend(diff(&shown, &now));
                shown = now;
                revision = scene.revision();
            }
            for l in block {
                if let Err(e) = writeln!(out, "{l}") {
                    failed = Some(e);
                    return;
                }
            }
        };
        let result = session.run_interaction_observed(speaker, listener, text, &mut print);
        if let Some(e) = failed {
            return Err(e);
        }
        if let Err(e) = result {
            writeln!(out, "error: {e}")?;
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_syntax() {
        assert_eq!(
            parse_line("Felix>Daniel: Give me the red glass."),
            Some(("Felix", "Daniel", "Give me the red glass."))
        );
        assert_eq!(parse_line(" Felix > Daniel :  hi: there "), Some(("Felix", "Daniel", "hi: there")));
        assert_eq!(parse_line("hello"), None);
        assert_eq!(parse_line("Felix: hi"), None);
        assert_eq!(parse_line(">Daniel: hi"), None);
        assert_eq!(parse_line("Felix>Daniel:   "), None);
    }
}
