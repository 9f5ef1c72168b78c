//! Line-oriented text format for distributions and hypothesis classes.
//!
//! ```text
//! # comment
//! num_contexts = 2
//! mass = 0.25 0.25 0.25 0.25
//! pos_rate = 0.5 0.1 0.9 0.0
//! hypothesis = plus + + + +
//! hypothesis = _ + - - +
//! ```
//!
//! Tables list cells in the order `(x0, a=-1), (x0, a=+1), (x1, a=-1), ...`.
//! A hypothesis line carries a tag (`_` for none) followed by one `+` or
//! `-` per cell; the class must include the four special classifiers
//! (all-positive, all-negative, and the two group indicators). Floats are written in shortest round-trip form so that
//! loading a saved instance reproduces it bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Hypothesis, HypothesisClass, Label, Population, TabularDistribution};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Instance {
    pub distribution: Option<TabularDistribution>,
    pub class: Option<HypothesisClass>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn write_floats(out: &mut String, key: &str, values: &[f64]) {
    let _ = write!(out, "{key} =");
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

pub fn format_instance(inst: &Instance) -> String {
    let mut out = String::new();
    let n = inst
        .distribution
        .as_ref()
        .map(|d| d.num_contexts())
        .or(inst.class.as_ref().map(|c| c.num_contexts()));
    if let Some(n) = n {
        let _ = writeln!(out, "num_contexts = {n}");
    }
    if let Some(d) = &inst.distribution {
        write_floats(&mut out, "mass", d.mass());
        write_floats(&mut out, "pos_rate", d.pos_rate());
    }
    if let Some(class) = &inst.class {
        for h in class.hypotheses() {
            let tag = h.tag.as_deref().unwrap_or("_");
            let _ = write!(out, "hypothesis = {tag}");
            for l in h.predictions() {
                out.push_str(match l {
                    Label::Pos => " +",
                    Label::Neg => " -",
                });
            }
            out.push('\n');
        }
    }
    out
}

fn parse_floats(line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line, format!("not a number: {tok:?}")))
        })
        .collect()
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut num_contexts: Option<(usize, usize)> = None;
    let mut mass: Option<(usize, Vec<f64>)> = None;
    let mut pos_rate: Option<(usize, Vec<f64>)> = None;
    let mut hypotheses: Vec<(usize, Hypothesis)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "num_contexts" => {
                if num_contexts.is_some() {
                    return Err(parse_err(line, "num_contexts given twice"));
                }
                let n = value
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("bad num_contexts {value:?}")))?;
                num_contexts = Some((line, n));
            }
            "mass" | "pos_rate" => {
                let slot = if key == "mass" {
                    &mut mass
                } else {
                    &mut pos_rate
                };
                if slot.is_some() {
                    return Err(parse_err(line, format!("{key} given twice")));
                }
                *slot = Some((line, parse_floats(line, value)?));
            }
            "hypothesis" => {
                let mut toks = value.split_whitespace();
                let tag = toks
                    .next()
                    .ok_or_else(|| parse_err(line, "hypothesis needs a tag"))?;
                let labels = toks
                    .map(|t| match t {
                        "+" | "+1" => Ok(Label::Pos),
                        "-" | "-1" => Ok(Label::Neg),
                        other => Err(parse_err(line, format!("bad label {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let tag = (tag != "_").then(|| tag.to_string());
                let h = Hypothesis::new(labels, tag).map_err(|e| parse_err(line, e.to_string()))?;
                hypotheses.push((line, h));
            }
            other => return Err(parse_err(line, format!("unknown key {other:?}"))),
        }
    }

    let needs_n = |line: usize| parse_err(line, "num_contexts must be given first");
    let distribution = match (mass, pos_rate) {
        (None, None) => None,
        (Some((l, _)), None) => return Err(parse_err(l, "mass given without pos_rate")),
        (None, Some((l, _))) => return Err(parse_err(l, "pos_rate given without mass")),
        (Some((lm, m)), Some((lp, p))) => {
            let (ln, n) = num_contexts.ok_or_else(|| needs_n(lm.min(lp)))?;
            if ln > lm.min(lp) {
                return Err(needs_n(lm.min(lp)));
            }
            Some(
                TabularDistribution::new(n, m, p)
                    .map_err(|e| parse_err(lm.max(lp), e.to_string()))?,
            )
        }
    };
    let class = if hypotheses.is_empty() {
        None
    } else {
        let first = hypotheses[0].0;
        let last = hypotheses.last().map(|h| h.0).unwrap_or(first);
        let (_, n) = num_contexts.ok_or_else(|| needs_n(first))?;
        for (l, h) in &hypotheses {
            if h.num_contexts() != n {
                return Err(parse_err(
                    *l,
                    format!(
                        "hypothesis covers {} contexts, expected {n}",
                        h.num_contexts()
                    ),
                ));
            }
        }
        let hs = hypotheses.into_iter().map(|(_, h)| h).collect();
        Some(HypothesisClass::new(n, hs).map_err(|e| parse_err(last, e.to_string()))?)
    };
    Ok(Instance {
        distribution,
        class,
    })
}

pub fn save_distribution(d: &TabularDistribution) -> String {
    format_instance(&Instance {
        distribution: Some(d.clone()),
        class: None,
    })
}

pub fn load_distribution(text: &str) -> Result<TabularDistribution> {
    parse_instance(text)?
        .distribution
        .ok_or_else(|| parse_err(0, "no distribution in input"))
}

pub fn save_class(class: &HypothesisClass) -> String {
    format_instance(&Instance {
        distribution: None,
        class: Some(class.clone()),
    })
}

pub fn load_class(text: &str) -> Result<HypothesisClass> {
    parse_instance(text)?
        .class
        .ok_or_else(|| parse_err(0, "no hypotheses in input"))
}

pub fn read_instance_file(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text)
}
