//! Text serialization of an [`UnfoldedModel`].
//!
//! The format is a sequence of `key = value` lines. Blank lines and lines
//! starting with `#` are ignored.
//!
//! ```text
//! depth = 5
//! mode = untied              # or tied
//! gradient_mode = exact      # or literal
//! larg_linear = false
//! loss_lambda = 0.1
//! loss_mu = 0.1
//! stage.0.log_lambda = -2.3025850929940455
//! ...                        # log_mu, log_alpha, log_beta, log_eta per slot
//! mixing.0.w_u = 100x100     # only with larg_linear = true; followed by
//! <row-major CSV block>      # that many CSV rows
//! mixing.0.w_v = 4x4
//! <row-major CSV block>
//! ```
//!
//! A tied model has one slot (index 0); an untied model has `depth` slots.
//! Floats are printed in shortest round-trip form, so save/load is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sspca_core::admm::GradientMode;
use sspca_core::unfolding::{Mixing, StageParams, Tying, UnfoldedModel};
use sspca_core::Matrix;

use crate::error::FormatError;
use crate::io::{parse_csv, push_csv_row};

const STAGE_KEYS: [&str; StageParams::LEN] =
    ["log_lambda", "log_mu", "log_alpha", "log_beta", "log_eta"];

pub fn gradient_mode_name(mode: GradientMode) -> &'static str {
    match mode {
        GradientMode::Exact => "exact",
        GradientMode::Literal => "literal",
    }
}

pub fn tying_name(tying: Tying) -> &'static str {
    match tying {
        Tying::Tied => "tied",
        Tying::Untied => "untied",
    }
}

pub fn model_to_string(model: &UnfoldedModel) -> String {
    let mut out = String::from("# sspca unfolded model\n");
    writeln!(out, "depth = {}", model.depth()).unwrap();
    writeln!(out, "mode = {}", tying_name(model.tying())).unwrap();
    writeln!(
        out,
        "gradient_mode = {}",
        gradient_mode_name(model.gradient_mode)
    )
    .unwrap();
    writeln!(out, "larg_linear = {}", model.larg_linear()).unwrap();
    writeln!(out, "loss_lambda = {:?}", model.loss_lambda).unwrap();
    writeln!(out, "loss_mu = {:?}", model.loss_mu).unwrap();
    for (s, stage) in model.stages().iter().enumerate() {
        for (key, v) in STAGE_KEYS.iter().zip(stage.to_array()) {
            writeln!(out, "stage.{s}.{key} = {v:?}").unwrap();
        }
    }
    if let Some(mix) = model.mixing() {
        for (s, w) in mix.iter().enumerate() {
            for (name, m) in [("w_u", &w.w_u), ("w_v", &w.w_v)] {
                writeln!(out, "mixing.{s}.{name} = {}x{}", m.rows(), m.cols()).unwrap();
                for i in 0..m.rows() {
                    push_csv_row(&mut out, m.row(i));
                }
            }
        }
    }
    out
}

pub fn save_model(model: &UnfoldedModel, path: &Path) -> Result<(), FormatError> {
    fs::write(path, model_to_string(model)).map_err(|e| FormatError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<UnfoldedModel, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_model(&text, path)
}

/// Parses the text form; `path` is only used in error messages.
pub fn parse_model(text: &str, path: &Path) -> Result<UnfoldedModel, FormatError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut scalars: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut blocks: BTreeMap<String, Matrix> = BTreeMap::new();
    let mut i = 0;
    while i < lines.len() {
        let lineno = i + 1;
        let line = lines[i].trim();
        i += 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                FormatError::parse(
                    path,
                    lineno,
                    format!("expected `key = value`, found {line:?}"),
                )
            })?;
        if scalars.contains_key(key) || blocks.contains_key(key) {
            return Err(FormatError::parse(
                path,
                lineno,
                format!("duplicate key {key:?}"),
            ));
        }
        if key.starts_with("mixing.") {
            let (r, c) = value
                .split_once('x')
                .and_then(|(r, c)| {
                    Some((
                        r.trim().parse::<usize>().ok()?,
                        c.trim().parse::<usize>().ok()?,
                    ))
                })
                .ok_or_else(|| {
                    FormatError::parse(
                        path,
                        lineno,
                        format!("expected `ROWSxCOLS`, found {value:?}"),
                    )
                })?;
            if i + r > lines.len() {
                return Err(FormatError::parse(
                    path,
                    lineno,
                    format!(
                        "{key}: expected {r} matrix rows, file ends after {}",
                        lines.len() - i
                    ),
                ));
            }
            let block = parse_csv(&lines[i..i + r].join("\n"), path).map_err(|e| match e {
                FormatError::Parse { line, message, .. } => {
                    FormatError::parse(path, i + line, message)
                }
                other => other,
            })?;
            if block.shape() != (r, c) {
                return Err(FormatError::parse(
                    path,
                    lineno,
                    format!(
                        "{key}: declared {r}x{c}, found {}x{}",
                        block.rows(),
                        block.cols()
                    ),
                ));
            }
            i += r;
            blocks.insert(key.to_string(), block);
        } else {
            scalars.insert(key.to_string(), (lineno, value.to_string()));
        }
    }

    let mut take = |key: &str| {
        scalars
            .remove(key)
            .ok_or_else(|| FormatError::malformed(path, format!("missing key {key:?}")))
    };
    fn num<T: std::str::FromStr>(
        path: &Path,
        key: &str,
        (line, v): (usize, String),
    ) -> Result<T, FormatError> {
        v.parse()
            .map_err(|_| FormatError::parse(path, line, format!("{key}: cannot parse {v:?}")))
    }

    let depth: usize = num(path, "depth", take("depth")?)?;
    let loss_lambda: f64 = num(path, "loss_lambda", take("loss_lambda")?)?;
    let loss_mu: f64 = num(path, "loss_mu", take("loss_mu")?)?;
    let larg_linear: bool = num(path, "larg_linear", take("larg_linear")?)?;
    let (line, mode) = take("mode")?;
    let tying = match mode.as_str() {
        "tied" => Tying::Tied,
        "untied" => Tying::Untied,
        other => {
            return Err(FormatError::parse(
                path,
                line,
                format!("mode: expected tied or untied, found {other:?}"),
            ))
        }
    };
    let (line, gm) = take("gradient_mode")?;
    let gradient_mode = match gm.as_str() {
        "exact" => GradientMode::Exact,
        "literal" => GradientMode::Literal,
        other => {
            return Err(FormatError::parse(
                path,
                line,
                format!("gradient_mode: expected exact or literal, found {other:?}"),
            ))
        }
    };
    let slots = match tying {
        Tying::Tied => 1,
        Tying::Untied => depth,
    };
    let mut stages = Vec::with_capacity(slots);
    for s in 0..slots {
        let mut v = [0.0; StageParams::LEN];
        for (out, key) in v.iter_mut().zip(STAGE_KEYS) {
            let full = format!("stage.{s}.{key}");
            *out = num(path, &full, take(&full)?)?;
        }
        stages.push(StageParams::from_array(v));
    }
    let mixing = if larg_linear {
        let mut mix = Vec::with_capacity(slots);
        for s in 0..slots {
            let mut get = |name: &str| {
                let key = format!("mixing.{s}.{name}");
                blocks
                    .remove(&key)
                    .ok_or_else(|| FormatError::malformed(path, format!("missing block {key:?}")))
            };
            mix.push(Mixing {
                w_u: get("w_u")?,
                w_v: get("w_v")?,
            });
        }
        Some(mix)
    } else {
        None
    };
    if let Some((key, (line, _))) = scalars.into_iter().next() {
        return Err(FormatError::parse(
            path,
            line,
            format!("unknown key {key:?}"),
        ));
    }
    if let Some(key) = blocks.into_keys().next() {
        return Err(FormatError::malformed(
            path,
            format!("unexpected block {key:?}"),
        ));
    }
    Ok(UnfoldedModel::from_parts(
        depth,
        tying,
        stages,
        mixing,
        loss_lambda,
        loss_mu,
        gradient_mode,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(tying: Tying, larg: bool) -> UnfoldedModel {
        let slots = if tying == Tying::Tied { 1 } else { 3 };
        let stages = (0..slots)
            .map(|s| {
                StageParams::from_array([
                    0.1 * s as f64 - 2.3,
                    -1.0 / 3.0,
                    0.0,
                    1e-17,
                    -7.123456789012345,
                ])
            })
            .collect();
        let mixing = larg.then(|| {
            (0..slots)
                .map(|s| Mixing {
                    w_u: Matrix::from_fn(4, 4, |i, j| (i * 4 + j + s) as f64 / 7.0),
                    w_v: Matrix::from_fn(2, 2, |i, j| if i == j { 1.0 } else { -0.1 }),
                })
                .collect()
        });
        UnfoldedModel::from_parts(3, tying, stages, mixing, 0.1, 0.25, GradientMode::Literal)
            .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for tying in [Tying::Tied, Tying::Untied] {
            for larg in [false, true] {
                let m = sample(tying, larg);
                let back = parse_model(&model_to_string(&m), Path::new("m.txt")).unwrap();
                assert_eq!(back, m);
                let bits = |m: &UnfoldedModel| {
                    m.parameters()
                        .iter()
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>()
                };
                assert_eq!(bits(&back), bits(&m));
            }
        }
    }

    #[test]
    fn malformed_models_are_rejected() {
        let text = model_to_string(&sample(Tying::Untied, true));
        let p = Path::new("m.txt");
        let cases = [
            text.replace("depth = 3", "depth = three"),
            text.replace("mode = untied", "mode = loose"),
            text.replace("stage.2.log_eta", "stage.2.log_eat"),
            text.replace("mixing.1.w_v = 2x2", "mixing.1.w_v = 3x2"),
            format!("{text}extra = 1\n"),
            text.lines()
                .take(text.lines().count() - 1)
                .collect::<Vec<_>>()
                .join("\n"),
        ];
        for bad in cases {
            assert!(parse_model(&bad, p).is_err(), "{bad}");
        }
        let e = parse_model(&text.replace("depth = 3", "depth = x"), p)
            .unwrap_err()
            .to_string();
        assert!(e.contains("m.txt:2:"), "{e}");
    }
}
