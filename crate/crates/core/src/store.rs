//! Versioned plain-text model files.
//!
//! ```text
//! bta-forest-model 1
//! [params]
//! trees 2
//! seed 0
//! min_samples_split 2
//! features_per_node sqrt
//! max_depth none
//! num_features 16
//! [classes] 3
//! 0 1+2 1 2          class id, name, original labels
//! 1 3 3
//! 2 4 4
//! [priors]
//! 0.5 0.3 0.2
//! [tree 0] 3         node count, then preorder nodes
//! S 4 0.25 2         split: feature, threshold, right child index
//! L 0                leaf: class
//! L 2
//! [oob 0]            K rows of raw OOB counts
//! 3 0 1
//! ...
//! [end]
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a loaded model
//! predicts bit-identically to the saved one.

use std::io::{BufRead, Write};

use crate::data::{ClassPriors, LabelDict};
use crate::error::{Error, Result};
use crate::forest::{ConfusionMatrix, ForestModel, ForestParams};
use crate::tree::{DecisionTree, FeatureSubset, Node, TreeParams};

pub const FORMAT_MAGIC: &str = "bta-forest-model";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_model<W: Write>(model: &ForestModel, mut out: W) -> Result<()> {
    let params = model.params();
    writeln!(out, "{FORMAT_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "[params]")?;
    writeln!(out, "trees {}", params.num_trees)?;
    writeln!(out, "seed {}", params.seed)?;
    writeln!(out, "min_samples_split {}", params.tree.min_samples_split)?;
    match params.tree.features_per_node {
        FeatureSubset::Sqrt => writeln!(out, "features_per_node sqrt")?,
        FeatureSubset::Count(n) => writeln!(out, "features_per_node {n}")?,
    }
    match params.tree.max_depth {
        None => writeln!(out, "max_depth none")?,
        Some(d) => writeln!(out, "max_depth {d}")?,
    }
    writeln!(out, "num_features {}", model.num_features())?;

    let dict = model.label_dict();
    writeln!(out, "[classes] {}", dict.len())?;
    for class in 0..dict.len() {
        write!(out, "{class} {}", dict.name(class))?;
        for orig in dict.originals(class) {
            write!(out, " {orig}")?;
        }
        writeln!(out)?;
    }

    writeln!(out, "[priors]")?;
    let priors: Vec<String> = model.priors().probs().iter().map(|p| format!("{p:?}")).collect();
    writeln!(out, "{}", priors.join(" "))?;

    for (t, (tree, oob)) in model.trees().iter().zip(model.oob_matrices()).enumerate() {
        writeln!(out, "[tree {t}] {}", tree.nodes().len())?;
        for node in tree.nodes() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => writeln!(out, "S {feature} {threshold:?} {right}")?,
                Node::Leaf { class } => writeln!(out, "L {class}")?,
            }
        }
        writeln!(out, "[oob {t}]")?;
        for y in 0..oob.num_classes() {
            let row: Vec<String> = oob.row(y).iter().map(u64::to_string).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    writeln!(out, "[end]")?;
    out.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
}

impl<R: BufRead> Lines<R> {
    /// Next non-empty line, or a load error naming `section` on EOF.
    fn next(&mut self, section: &str) -> Result<String> {
        loop {
            match self.inner.next() {
                None => return Err(Error::load(section, "unexpected end of file")),
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
            }
        }
    }

    /// Expects `<header>` optionally followed by one value; returns that value.
    fn header(&mut self, header: &str) -> Result<Option<String>> {
        let line = self.next(header)?;
        let rest = line
            .strip_prefix(header)
            .ok_or_else(|| Error::load(header, format!("expected `{header}`, found {line:?}")))?;
        let rest = rest.trim();
        Ok((!rest.is_empty()).then(|| rest.to_string()))
    }

    fn key_value(&mut self, section: &str, key: &str) -> Result<String> {
        let line = self.next(section)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => Err(Error::load(section, format!("expected `{key} <value>`, found {line:?}"))),
        }
    }
}

fn num<T: std::str::FromStr>(section: &str, what: &str, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::load(section, format!("bad {what} {token:?}")))
}

fn counted_header<R: BufRead>(lines: &mut Lines<R>, header: &str) -> Result<usize> {
    let value = lines
        .header(header)?
        .ok_or_else(|| Error::load(header, "missing count"))?;
    num(header, "count", &value)
}

pub fn load_model<R: BufRead>(reader: R) -> Result<ForestModel> {
    let mut lines = Lines {
        inner: reader.lines(),
    };
    let first = lines.next("header")?;
    match first.split_once(' ') {
        Some((magic, version)) if magic == FORMAT_MAGIC => {
            if version.trim() != FORMAT_VERSION.to_string() {
                return Err(Error::Version(version.trim().to_string()));
            }
        }
        _ => return Err(Error::Version(first)),
    }

    const P: &str = "[params]";
    lines.header(P)?;
    let num_trees: usize = num(P, "tree count", &lines.key_value(P, "trees")?)?;
    let seed: u64 = num(P, "seed", &lines.key_value(P, "seed")?)?;
    let min_samples_split = num(P, "min_samples_split", &lines.key_value(P, "min_samples_split")?)?;
    let features_per_node = match lines.key_value(P, "features_per_node")?.as_str() {
        "sqrt" => FeatureSubset::Sqrt,
        n => FeatureSubset::Count(num(P, "features_per_node", n)?),
    };
    let max_depth = match lines.key_value(P, "max_depth")?.as_str() {
        "none" => None,
        d => Some(num(P, "max_depth", d)?),
    };
    let num_features: usize = num(P, "num_features", &lines.key_value(P, "num_features")?)?;
    let params = ForestParams {
        num_trees,
        seed,
        tree: TreeParams {
            min_samples_split,
            features_per_node,
            max_depth,
        },
    };

    const C: &str = "[classes]";
    let k = counted_header(&mut lines, C)?;
    let mut parts = Vec::with_capacity(k);
    for class in 0..k {
        let line = lines.next(C)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 3 || num::<usize>(C, "class id", tokens[0])? != class {
            return Err(Error::load(C, format!("bad class line {line:?}")));
        }
        parts.push((
            tokens[1].to_string(),
            tokens[2..].iter().map(|s| s.to_string()).collect(),
        ));
    }
    let dict = LabelDict::from_parts(parts).map_err(|e| Error::load(C, e.to_string()))?;

    const PR: &str = "[priors]";
    lines.header(PR)?;
    let priors: Vec<f64> = lines
        .next(PR)?
        .split_whitespace()
        .map(|t| num(PR, "prior", t))
        .collect::<Result<_>>()?;
    let priors = ClassPriors::new(priors)?;

    let mut trees = Vec::with_capacity(num_trees);
    let mut oob = Vec::with_capacity(num_trees);
    for t in 0..num_trees {
        let section = format!("[tree {t}]");
        let count = counted_header(&mut lines, &section)?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next(&section)?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let node = match tokens.as_slice() {
                ["S", f, thr, right] => Node::Split {
                    feature: num(&section, "feature", f)?,
                    threshold: num(&section, "threshold", thr)?,
                    right: num(&section, "child offset", right)?,
                },
                ["L", class] => Node::Leaf {
                    class: num(&section, "leaf class", class)?,
                },
                _ => return Err(Error::load(&section, format!("bad node {line:?}"))),
            };
            nodes.push(node);
        }
        trees.push(DecisionTree::from_nodes(nodes, num_features, k)?);

        let section = format!("[oob {t}]");
        lines.header(&section)?;
        let mut rows = Vec::with_capacity(k);
        for _ in 0..k {
            let row: Vec<i64> = lines
                .next(&section)?
                .split_whitespace()
                .map(|c| num(&section, "count", c))
                .collect::<Result<_>>()?;
            if row.iter().any(|&c| c < 0) {
                return Err(Error::Invariant(format!("negative count in OOB matrix {t}")));
            }
            rows.push(row.into_iter().map(|c| c as u64).collect());
        }
        oob.push(ConfusionMatrix::from_rows(&rows).map_err(|e| Error::load(&section, e.to_string()))?);
    }
    lines.header("[end]")?;
    ForestModel::from_parts(trees, oob, priors, dict, num_features, params)
}
