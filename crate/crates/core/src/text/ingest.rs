use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use super::profile::{CsvSchema, DatasetProfile};
use super::{Body, RawSample};
use crate::error::{Error, Result};

/// MBTI dimensions in type-code letter order.
pub const MBTI_TRAITS: [&str; 4] = ["EI", "SN", "TF", "JP"];

/// Splits a 4-letter type code into four binary labels.
///
/// The first letter of each pair maps to 1: E=1/I=0, S=1/N=0, T=1/F=0,
/// J=1/P=0. Matching is case-insensitive.
pub fn decode_mbti(code: &str) -> Result<BTreeMap<String, u8>> {
    const PAIRS: [(char, char); 4] = [('E', 'I'), ('S', 'N'), ('T', 'F'), ('J', 'P')];
    let letters: Vec<char> = code.trim().chars().map(|c| c.to_ascii_uppercase()).collect();
    if letters.len() != 4 {
        return Err(Error::UnknownTypeCode(code.to_string()));
    }
    let mut labels = BTreeMap::new();
    for ((&letter, (one, zero)), name) in letters.iter().zip(PAIRS).zip(MBTI_TRAITS) {
        let bit = if letter == one {
            1
        } else if letter == zero {
            0
        } else {
            return Err(Error::UnknownTypeCode(code.to_string()));
        };
        labels.insert(name.to_string(), bit);
    }
    Ok(labels)
}

fn parse_binary(value: &str, row: usize, column: &str) -> Result<u8> {
    match value.trim().to_ascii_lowercase().as_str() {
        "y" | "yes" | "1" | "true" => Ok(1),
        "n" | "no" | "0" | "false" => Ok(0),
        other => Err(Error::MalformedRow {
            row,
            message: format!("column {column}: expected y/n, got {other:?}"),
        }),
    }
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Config(format!("missing column {name:?}")))
}

/// Reads every record of a dataset file under `profile`'s schema.
pub fn ingest(path: impl AsRef<Path>, profile: &DatasetProfile) -> Result<Vec<RawSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, profile)
}

/// Rows are numbered from 1, not counting the header.
pub fn ingest_reader<R: Read>(reader: R, profile: &DatasetProfile) -> Result<Vec<RawSample>> {
    profile.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    // Public essay dumps are not always valid UTF-8, so decode lossily.
    let headers: Vec<String> = rdr
        .byte_headers()?
        .iter()
        .map(|h| String::from_utf8_lossy(h).trim_start_matches('\u{feff}').to_string())
        .collect();

    let mut out = Vec::new();
    for (i, rec) in rdr.byte_records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| -> Result<String> {
            rec.get(idx)
                .map(|b| String::from_utf8_lossy(b).into_owned())
                .ok_or_else(|| Error::MalformedRow {
                    row,
                    message: format!("missing field {idx}"),
                })
        };
        let sample = match &profile.schema {
            CsvSchema::Essays {
                id_column,
                text_column,
                trait_columns,
            } => {
                let id = field(column_index(&headers, id_column)?)?.trim().to_string();
                let text = field(column_index(&headers, text_column)?)?;
                let id = if id.is_empty() { format!("row-{row}") } else { id };
                if text.trim().is_empty() {
                    return Err(Error::EmptyBody(id));
                }
                let mut labels = BTreeMap::new();
                for tc in trait_columns {
                    let v = field(column_index(&headers, &tc.column)?)?;
                    labels.insert(tc.name.clone(), parse_binary(&v, row, &tc.column)?);
                }
                RawSample {
                    id,
                    body: Body::Essay(text),
                    labels,
                }
            }
            CsvSchema::Mbti {
                id_column,
                type_column,
                posts_column,
                post_delimiter,
            } => {
                let id = match id_column {
                    Some(c) => field(column_index(&headers, c)?)?.trim().to_string(),
                    None => format!("row-{row}"),
                };
                let code = field(column_index(&headers, type_column)?)?;
                let labels = decode_mbti(&code)?;
                let blob = field(column_index(&headers, posts_column)?)?;
                // The public dump wraps each blob in single quotes.
                let blob = blob.trim();
                let blob = blob.strip_prefix('\'').unwrap_or(blob);
                let blob = blob.strip_suffix('\'').unwrap_or(blob);
                let posts: Vec<String> = blob
                    .split(post_delimiter.as_str())
                    .map(|p| p.trim().to_string())
                    .filter(|p| !p.is_empty())
                    .collect();
                if posts.is_empty() {
                    return Err(Error::EmptyBody(id));
                }
                RawSample {
                    id,
                    body: Body::Posts(posts),
                    labels,
                }
            }
        };
        out.push(sample);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pairs: &[(&str, u8)]) -> BTreeMap<String, u8> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn intj_row_decodes_to_two_posts() {
        let mut p = DatasetProfile::twitter();
        if let CsvSchema::Mbti { post_delimiter, .. } = &mut p.schema {
            *post_delimiter = "<SEP>".to_string();
        }
        let csv = "type,posts\nINTJ,p1<SEP>p2\n";
        let s = ingest_reader(csv.as_bytes(), &p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].body, Body::Posts(vec!["p1".into(), "p2".into()]));
        assert_eq!(
            s[0].labels,
            labels(&[("EI", 0), ("SN", 0), ("TF", 1), ("JP", 1)])
        );
    }

    #[test]
    fn default_delimiter_and_quote_stripping() {
        let csv = "type,posts\nESFP,'hello there|||http://x.co|||bye'\n";
        let s = ingest_reader(csv.as_bytes(), &DatasetProfile::twitter()).unwrap();
        assert_eq!(
            s[0].body,
            Body::Posts(vec!["hello there".into(), "http://x.co".into(), "bye".into()])
        );
        assert_eq!(
            s[0].labels,
            labels(&[("EI", 1), ("SN", 1), ("TF", 0), ("JP", 0)])
        );
    }

    #[test]
    fn empty_posts_field_is_an_error() {
        let csv = "type,posts\nINTJ,\n";
        let err = ingest_reader(csv.as_bytes(), &DatasetProfile::twitter()).unwrap_err();
        assert!(err.to_string().contains("empty body"), "{err}");
        let csv = "type,posts\nINTJ,'|||  |||'\n";
        assert!(matches!(
            ingest_reader(csv.as_bytes(), &DatasetProfile::twitter()),
            Err(Error::EmptyBody(_))
        ));
    }

    #[test]
    fn unknown_type_code_is_named() {
        let csv = "type,posts\nXNTJ,hi\n";
        let err = ingest_reader(csv.as_bytes(), &DatasetProfile::twitter()).unwrap_err();
        assert!(err.to_string().contains("XNTJ"));
        assert!(decode_mbti("INT").is_err());
    }

    #[test]
    fn essays_all_yes_row() {
        let csv = "#AUTHID,TEXT,cEXT,cNEU,cAGR,cCON,cOPN\n\
                   1997_504851.txt,\"Well, right now I just woke up.\",y,y,y,y,y\n\
                   1997_605191.txt,Another essay.,n,y,n,n,y\n";
        let s = ingest_reader(csv.as_bytes(), &DatasetProfile::essays()).unwrap();
        assert_eq!(s[0].id, "1997_504851.txt");
        assert!(s[0].labels.values().all(|&v| v == 1));
        assert_eq!(s[0].labels.len(), 5);
        assert_eq!(
            s[1].labels,
            labels(&[("EXT", 0), ("NEU", 1), ("AGR", 0), ("CON", 0), ("OPN", 1)])
        );
    }

    #[test]
    fn malformed_rows_carry_row_number() {
        let csv = "#AUTHID,TEXT,cEXT,cNEU,cAGR,cCON,cOPN\n\
                   a,ok,y,y,y,y,y\n\
                   b,bad,y,maybe,y,y,y\n";
        match ingest_reader(csv.as_bytes(), &DatasetProfile::essays()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "#AUTHID,TEXT,cEXT,cNEU,cAGR,cCON,cOPN\na,ok,y,y\n";
        match ingest_reader(csv.as_bytes(), &DatasetProfile::essays()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_utf8_text_is_decoded_lossily() {
        let mut bytes = b"#AUTHID,TEXT,cEXT,cNEU,cAGR,cCON,cOPN\na,caf".to_vec();
        bytes.push(0xe9);
        bytes.extend_from_slice(b" time,y,n,y,n,y\n");
        let s = ingest_reader(bytes.as_slice(), &DatasetProfile::essays()).unwrap();
        match &s[0].body {
            Body::Essay(t) => assert!(t.starts_with("caf") && t.ends_with(" time")),
            _ => unreachable!(),
        }
    }
}
