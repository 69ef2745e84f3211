//! Strict RFC-4180 reading and writing.
//!
//! Records end at LF or CRLF. A `"` may only open a field or appear doubled
//! inside a quoted field; anything else is reported with its byte offset.
//! Completely empty lines are skipped.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// 1-based record number, header included.
    pub number: usize,
    /// Byte offset of the first character of the record.
    pub offset: usize,
    pub fields: Vec<String>,
}

pub fn read_records(bytes: &[u8]) -> Result<Vec<Record>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse { offset: e.valid_up_to(), message: "invalid UTF-8".into() })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let bom = bytes.len() - text.len();
    let b = text.as_bytes();

    let mut records = Vec::new();
    let mut pos = 0;
    while pos < b.len() {
        let start = pos;
        let mut fields = Vec::new();
        loop {
            let (field, next) = read_field(text, pos, bom)?;
            fields.push(field);
            pos = next;
            match b.get(pos) {
                Some(b',') => pos += 1,
                Some(b'\r') if b.get(pos + 1) == Some(&b'\n') => {
                    pos += 2;
                    break;
                }
                Some(b'\n') => {
                    pos += 1;
                    break;
                }
                None => break,
                Some(_) => unreachable!("read_field stops only at a delimiter"),
            }
        }
        if fields.len() == 1 && fields[0].is_empty() && !text[start..pos].starts_with('"') {
            continue;
        }
        records.push(Record { number: records.len() + 1, offset: start + bom, fields });
    }
    Ok(records)
}

fn read_field(text: &str, start: usize, bom: usize) -> Result<(String, usize)> {
    let b = text.as_bytes();
    if b.get(start) != Some(&b'"') {
        let mut i = start;
        while i < b.len() {
            match b[i] {
                b',' | b'\n' => break,
                b'\r' if b.get(i + 1) == Some(&b'\n') => break,
                b'"' => return Err(Error::Parse { offset: i + bom, message: "quote inside unquoted field".into() }),
                _ => i += 1,
            }
        }
        return Ok((text[start..i].to_string(), i));
    }

    let mut out = String::new();
    let mut seg = start + 1;
    let mut i = start + 1;
    loop {
        match b.get(i) {
            None => return Err(Error::Parse { offset: start + bom, message: "unterminated quoted field".into() }),
            Some(b'"') if b.get(i + 1) == Some(&b'"') => {
                out.push_str(&text[seg..=i]);
                i += 2;
                seg = i;
            }
            Some(b'"') => {
                out.push_str(&text[seg..i]);
                let after = i + 1;
                match b.get(after) {
                    None | Some(b',') | Some(b'\n') => return Ok((out, after)),
                    Some(b'\r') if b.get(after + 1) == Some(&b'\n') => return Ok((out, after)),
                    Some(_) => {
                        return Err(Error::Parse {
                            offset: after + bom,
                            message: "unexpected character after closing quote".into(),
                        })
                    }
                }
            }
            Some(_) => i += 1,
        }
    }
}

pub fn needs_quoting(field: &str) -> bool {
    field.bytes().any(|c| matches!(c, b',' | b'"' | b'\r' | b'\n'))
}

pub fn write_field(out: &mut String, field: &str) {
    if needs_quoting(field) {
        out.push('"');
        out.push_str(&field.replace('"', "\"\""));
        out.push('"');
    } else {
        out.push_str(field);
    }
}

/// Appends one LF-terminated record.
pub fn write_record<S: AsRef<str>>(out: &mut String, fields: &[S]) {
    // a lone empty field would otherwise read back as a skipped blank line
    if let [only] = fields {
        if only.as_ref().is_empty() {
            out.push_str("\"\"\n");
            return;
        }
    }
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_field(out, f.as_ref());
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(s: &str) -> Vec<Vec<String>> {
        read_records(s.as_bytes()).unwrap().into_iter().map(|r| r.fields).collect()
    }

    #[test]
    fn quoted_commas_and_newlines_survive() {
        let rows = fields("a,b\nx1,\"hello, world\"\nx2,\"two\nlines\"\r\nx3,\"say \"\"hi\"\"\"\n");
        assert_eq!(rows[1], vec!["x1", "hello, world"]);
        assert_eq!(rows[2], vec!["x2", "two\nlines"]);
        assert_eq!(rows[3], vec!["x3", "say \"hi\""]);
    }

    #[test]
    fn crlf_inside_quotes_is_kept() {
        assert_eq!(fields("\"a\r\nb\",c\r\n")[0], vec!["a\r\nb", "c"]);
    }

    #[test]
    fn no_trailing_newline() {
        assert_eq!(fields("a,b\n1,2"), vec![vec!["a", "b"], vec!["1", "2"]]);
    }

    #[test]
    fn empty_lines_skipped_but_empty_quoted_field_kept() {
        assert_eq!(fields("a\n\nb\n").len(), 2);
        assert_eq!(fields("a\n\"\"\n")[1], vec![""]);
    }

    #[test]
    fn malformed_quotes_report_offsets() {
        match read_records(b"id,t\nx,\"abc\"d\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
        match read_records(b"id,t\nx,\"abc\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        match read_records(b"id,t\nx,ab\"c\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_utf8_is_a_parse_error() {
        assert!(matches!(read_records(b"a,\xff\n"), Err(Error::Parse { offset: 2, .. })));
    }

    #[test]
    fn writer_quotes_only_when_needed() {
        let mut s = String::new();
        write_record(&mut s, &["plain", "a,b", "q\"q", "line\nbreak"]);
        assert_eq!(s, "plain,\"a,b\",\"q\"\"q\",\"line\nbreak\"\n");
        assert_eq!(fields(&s)[0], vec!["plain", "a,b", "q\"q", "line\nbreak"]);
    }
}
