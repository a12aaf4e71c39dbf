//! LibSVM text format.
//!
//! ```text
//! 1 1:7 2:3 4:-1 # comment
//! -1 2:1 3:14
//! ```
//!
//! One sample per non-blank line: a label token followed by `index:value`
//! pairs with strictly ascending 1-based indices. Files ending in `.gz` are
//! decompressed on the fly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::data::{ClassId, Dataset, LabelDict, SampleVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseDiagnostics {
    pub line_count: usize,
    pub skipped_blank_lines: usize,
    pub max_feature_index: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Lower bound on the feature count; the observed maximum index wins if larger.
    pub expected_num_features: Option<usize>,
    /// Keep only the first `n` samples.
    pub limit: Option<usize>,
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<(String, SampleVector)>> {
    let content = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let mut tokens = content.split_ascii_whitespace();
    let label = match tokens.next() {
        Some(tok) => tok,
        None => return Ok(None),
    };
    if label.contains(':') {
        return Err(Error::parse(lineno, "label missing"));
    }
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, format!("expected index:value, got {tok:?}")))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad feature index {idx:?}")))?;
        if idx < 1 {
            return Err(Error::parse(lineno, "feature index must be >= 1"));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad feature value {val:?}")))?;
        if let Some(&(prev, _)) = entries.last() {
            if idx == prev {
                return Err(Error::parse(lineno, format!("duplicate feature index {idx}")));
            }
            if idx < prev {
                return Err(Error::parse(
                    lineno,
                    format!("feature index {idx} follows {prev}; indices must ascend"),
                ));
            }
        }
        entries.push((idx, val));
    }
    Ok(Some((label.to_string(), SampleVector::new(entries)?)))
}

/// Parses a LibSVM stream into a dataset whose dictionary is built from the labels seen.
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    options: ParseOptions,
) -> Result<(Dataset, ParseDiagnostics)> {
    let mut diag = ParseDiagnostics::default();
    let mut samples = Vec::new();
    let mut raw_labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        if options.limit.is_some_and(|n| samples.len() >= n) {
            break;
        }
        let line = line?;
        diag.line_count += 1;
        match parse_line(&line, i + 1)? {
            None => diag.skipped_blank_lines += 1,
            Some((label, sample)) => {
                diag.max_feature_index = diag.max_feature_index.max(sample.max_index() as usize);
                raw_labels.push(label);
                samples.push(sample);
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::parse(diag.line_count, "no samples in input"));
    }
    let num_features = diag
        .max_feature_index
        .max(options.expected_num_features.unwrap_or(0))
        .max(1);
    let ds = Dataset::from_raw_labels(samples, &raw_labels, num_features)?;
    Ok((ds, diag))
}

/// Opens `path` for buffered reading, decompressing when it ends in `.gz`.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|ext| ext == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 16, reader)))
}

pub fn read_libsvm_file(path: &Path, options: ParseOptions) -> Result<(Dataset, ParseDiagnostics)> {
    parse_libsvm(open_input(path)?, options)
}

/// Writes `ds` in LibSVM format. Labels are written as class names, so a
/// merged dataset emits its merged names; use it on unmerged data when a
/// faithful copy is needed.
pub fn write_libsvm<W: Write>(mut out: W, ds: &Dataset) -> Result<()> {
    for (sample, &label) in ds.samples().iter().zip(ds.labels()) {
        write!(out, "{}", ds.label_dict().name(label))?;
        for &(idx, val) in sample.entries() {
            write!(out, " {idx}:{val}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// One row of prediction output.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub sample_index: usize,
    pub class: ClassId,
    pub scores: Vec<f64>,
}

/// Tab-separated predictions: a header naming the classes, then
/// `index<TAB>label<TAB>score_0<TAB>...` per sample.
pub fn write_predictions<W: Write>(
    mut out: W,
    dict: &LabelDict,
    predictions: &[Prediction],
) -> Result<()> {
    write!(out, "index\tlabel")?;
    for name in dict.names() {
        write!(out, "\t{name}")?;
    }
    writeln!(out)?;
    for p in predictions {
        if p.scores.len() != dict.len() {
            return Err(Error::InvalidArgument(format!(
                "sample {} has {} scores for {} classes",
                p.sample_index,
                p.scores.len(),
                dict.len()
            )));
        }
        write!(out, "{}\t{}", p.sample_index, dict.name(p.class))?;
        for s in &p.scores {
            write!(out, "\t{s}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<(Dataset, ParseDiagnostics)> {
        parse_libsvm(Cursor::new(text), ParseOptions::default())
    }

    #[test]
    fn single_line() {
        let (ds, diag) = parse("1 1:0.5 3:2.0").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.label_dict().name(ds.labels()[0]), "1");
        assert_eq!(ds.samples()[0].entries(), &[(1, 0.5), (3, 2.0)]);
        assert!(ds.num_features() >= 3);
        assert_eq!(diag.max_feature_index, 3);
    }

    #[test]
    fn dictionary_ordering() {
        let (ds, _) = parse("2 2:1\n1 1:1").unwrap();
        assert_eq!(ds.label_dict().class_of("1"), Some(0));
        assert_eq!(ds.label_dict().class_of("2"), Some(1));
        assert_eq!(ds.labels(), &[1, 0]);
    }

    #[test]
    fn whitespace_comments_and_blanks() {
        let text = "1\t1:1   2:2  \n\n   \n-1 3:4 # trailing\n# only comment\n";
        let (ds, diag) = parse(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(diag.skipped_blank_lines, 3);
        assert_eq!(diag.line_count, 5);
        assert_eq!(ds.samples()[0].entries(), &[(1, 1.0), (2, 2.0)]);
    }

    #[test]
    fn expected_features_raise_m() {
        let opts = ParseOptions {
            expected_num_features: Some(10),
            limit: None,
        };
        let (ds, _) = parse_libsvm(Cursor::new("1 2:1"), opts).unwrap();
        assert_eq!(ds.num_features(), 10);
    }

    #[test]
    fn limit_takes_first_lines() {
        let opts = ParseOptions {
            expected_num_features: None,
            limit: Some(2),
        };
        let (ds, _) = parse_libsvm(Cursor::new("1 1:1\n2 1:2\n3 1:3\n"), opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_classes(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("1 1:1\n1 3:1 2:1", 2),
            ("1 0:1", 1),
            ("1 1:abc", 1),
            ("1 x:1", 1),
            ("1:1 2:2", 1),
            ("1 2:1 2:1", 1),
            ("1 12", 1),
        ];
        for (text, line) in cases {
            match parse(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(parse("abc 1:1"), Err(Error::NonNumericLabel(_))));
    }

    #[test]
    fn gzip_input_is_transparent() {
        use flate2::write::GzEncoder;
        use flate2::Compression;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), Compression::default());
        enc.write_all(b"1 1:1\n2 2:1\n").unwrap();
        enc.finish().unwrap();
        let (ds, _) = read_libsvm_file(&path, ParseOptions::default()).unwrap();
        assert_eq!(ds.len(), 2);
    }

    #[test]
    fn prediction_output() {
        let dict = LabelDict::from_labels(&["1", "2"]).unwrap();
        let mut buf = Vec::new();
        write_predictions(
            &mut buf,
            &dict,
            &[Prediction {
                sample_index: 0,
                class: 0,
                scores: vec![0.7, 0.3],
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index\tlabel\t1\t2\n0\t1\t0.7\t0.3\n");

        let mut buf = Vec::new();
        write_predictions(&mut buf, &dict, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);

        let preds: Vec<_> = (0..3)
            .map(|i| Prediction {
                sample_index: i,
                class: 1,
                scores: vec![0.0, 1.0],
            })
            .collect();
        let mut buf = Vec::new();
        write_predictions(&mut buf, &dict, &preds).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);

        let bad = Prediction {
            sample_index: 0,
            class: 0,
            scores: vec![1.0],
        };
        assert!(write_predictions(Vec::new(), &dict, &[bad]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sample_strategy() -> impl Strategy<Value = (i8, Vec<(u32, f64)>)> {
            (
                -3i8..4,
                prop::collection::btree_map(1u32..50, -1e6f64..1e6, 0..8),
            )
                .prop_map(|(l, m)| (l, m.into_iter().collect()))
        }

        proptest! {
            #[test]
            fn emit_parse_round_trip(rows in prop::collection::vec(sample_strategy(), 1..30)) {
                let labels: Vec<String> = rows.iter().map(|r| r.0.to_string()).collect();
                let samples: Vec<SampleVector> = rows.iter().map(|r| SampleVector::new(r.1.clone()).unwrap()).collect();
                let ds = Dataset::from_raw_labels(samples, &labels, 50).unwrap();
                let mut buf = Vec::new();
                write_libsvm(&mut buf, &ds).unwrap();
                let opts = ParseOptions { expected_num_features: Some(50), limit: None };
                let (back, _) = parse_libsvm(Cursor::new(buf), opts).unwrap();
                prop_assert_eq!(back, ds);
            }
        }
    }
}
