use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use clap::CommandFactory;
use serde_json::Value;

use crate::args::Cli;
use crate::error::CliError;

/// Splices values from `--config` into `argv`. A key already given on the
/// command line is left alone, so flags take precedence over the file and
/// the file over built-in defaults.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let cmd = Cli::command();
    let Some(sub) = subcommand(&cmd, &argv) else {
        // let clap report the missing subcommand
        return Ok(argv);
    };
    let known: BTreeMap<String, bool> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_owned(), a.get_action().takes_values())))
        .collect();
    let given: HashSet<String> =
        argv.iter().filter_map(|t| t.strip_prefix("--")).map(|t| t.split('=').next().unwrap_or(t).to_owned()).collect();

    let mut out = argv;
    for (key, value) in read_entries(Path::new(&path))? {
        let key = key.replace('_', "-");
        if key == "config" || given.contains(&key) {
            continue;
        }
        let Some(&takes_value) = known.get(&key) else {
            log::warn!("config key `{key}` does not apply to `{}`; ignored", sub.get_name());
            continue;
        };
        match (takes_value, value) {
            (_, None) => {}
            (true, Some(v)) => {
                out.push(format!("--{key}"));
                out.push(v);
            }
            (false, Some(v)) => match v.as_str() {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                other => {
                    return Err(CliError::Usage(format!("config key `{key}` expects true or false, got `{other}`")))
                }
            },
        }
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(t) = it.next() {
        if t == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = t.strip_prefix("--config=") {
            return Some(v.to_owned());
        }
    }
    None
}

fn subcommand<'a>(cmd: &'a clap::Command, argv: &[String]) -> Option<&'a clap::Command> {
    let mut cur = cmd;
    let mut found = false;
    for t in argv.iter().skip(1) {
        if t.starts_with('-') {
            break;
        }
        match cur.find_subcommand(t) {
            Some(s) => {
                cur = s;
                found = true;
            }
            None => break,
        }
    }
    (found && !cur.has_subcommands()).then_some(cur)
}

/// Either flat `key = value` lines or JSON (a manifest's `args` object, or a
/// plain object). `None` values mean "unset".
fn read_entries(path: &Path) -> Result<Vec<(String, Option<String>)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config file {} is not valid JSON: {e}", path.display())))?;
        let obj = match v.get("args") {
            Some(Value::Object(o)) => o.clone(),
            _ => match v {
                Value::Object(o) => o,
                _ => return Err(CliError::Usage("JSON config must be an object".into())),
            },
        };
        return obj.into_iter().map(|(k, v)| Ok((k, json_token(&v)))).collect();
    }
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("{}:{}: expected `key = value`", path.display(), n + 1)));
        };
        let v = v.trim();
        let v = v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v);
        entries.push((k.trim().to_owned(), Some(v.to_owned())));
    }
    Ok(entries)
}

fn json_token(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => Some(items.iter().filter_map(json_token).collect::<Vec<_>>().join(",")),
        other => Some(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn write(name: &str, body: &str) -> String {
        let p = std::env::temp_dir().join(format!("textclf-cfg-{}-{name}", std::process::id()));
        std::fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn flags_win_over_file() {
        let p = write("flat", "# comment\nseed = 3\nreps=5\nsequential = true\nmethods = nb,knn\nbogus = 1\n");
        let out = expand(argv(&format!("textclf benchmark --config {p} --seed 9"))).unwrap();
        let joined = out.join(" ");
        assert!(joined.contains("--seed 9"));
        assert!(!joined.contains("--seed 3"));
        assert!(joined.contains("--reps 5"));
        assert!(joined.contains("--sequential"));
        assert!(joined.contains("--methods nb,knn"));
        assert!(!joined.contains("bogus"));
    }

    #[test]
    fn manifest_args_are_read() {
        let p = write(
            "manifest.json",
            r#"{"command":"viz tsne","args":{"perplexity":5.0,"data":null,"heights":[3,4],"sequential":false}}"#,
        );
        let out = expand(argv(&format!("textclf viz tsne --config={p}"))).unwrap();
        assert_eq!(&out[4..], ["--perplexity", "5.0"]);
    }

    #[test]
    fn bad_files_are_usage_errors() {
        assert!(matches!(expand(argv("textclf train --config /nonexistent/x")), Err(CliError::Usage(_))));
        let p = write("bad", "no equals sign\n");
        assert!(matches!(expand(argv(&format!("textclf train --config {p}"))), Err(CliError::Usage(_))));
    }
}
