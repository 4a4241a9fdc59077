//! Plot data (line-delimited JSON) and the per-instance SHAP CSV.

use std::io::{Read, Write};

use serde_json::{json, Value};

use super::{rank_rows, ShapExplanation};
use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};

const RESERVED_COLUMNS: [&str; 3] = ["instance", "base_value", "model_output"];

/// Provenance written into every export header.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportContext {
    pub model: String,
    pub explained_quantity: String,
    pub dataset: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// Beeswarm points plus the mean-|SHAP| bar ranking.
    Summary,
    /// One instance, by position in the explanation list.
    Force { position: usize },
    /// (feature value, SHAP value) pairs for one feature.
    Dependence { feature: String },
}

impl PlotKind {
    fn name(&self) -> &'static str {
        match self {
            PlotKind::Summary => "summary",
            PlotKind::Force { .. } => "force",
            PlotKind::Dependence { .. } => "dependence",
        }
    }
}

fn write_line<W: Write>(out: &mut W, value: &Value) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(|e| Error::json("plot export", &e))?;
    out.write_all(b"\n")
        .map_err(|e| Error::io("<plot output>", e))
}

/// Write plot data for `explanations`; `inputs` holds the explained rows
/// (indexed by each explanation's `instance`).
pub fn export_explanations<W: Write>(
    explanations: &[ShapExplanation],
    inputs: &Dataset,
    kind: &PlotKind,
    ctx: &ExportContext,
    mut out: W,
) -> Result<()> {
    if explanations.is_empty() {
        return Err(Error::Data("no explanations to export".into()));
    }
    let schema = inputs.schema();
    let names = &schema.feature_names;
    let mut ordered: Vec<&ShapExplanation> = explanations.iter().collect();
    ordered.sort_by_key(|e| e.instance);
    if let Some(e) = ordered
        .iter()
        .find(|e| e.instance >= inputs.n_rows() || e.phi.len() != names.len())
    {
        return Err(Error::Contract(format!(
            "explanation {} does not match the {} x {} input table",
            e.instance,
            inputs.n_rows(),
            names.len()
        )));
    }

    let mut header = json!({
        "type": "header",
        "plot": kind.name(),
        "model": ctx.model,
        "explained_quantity": ctx.explained_quantity,
        "dataset": ctx.dataset,
        "config_hash": ctx.config_hash,
        "seed": ctx.seed,
        "instances": ordered.len(),
        "features": names,
    });
    if ctx.explained_quantity == "expected_path_length" {
        header["sign_convention"] =
            json!("negative values shorten the isolation path and push towards anomalous");
    }

    match kind {
        PlotKind::Summary => {
            write_line(&mut out, &header)?;
            let d = names.len();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for e in &ordered {
                for (j, &v) in inputs.row(e.instance).iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
            for e in &ordered {
                let x = inputs.row(e.instance);
                for j in 0..d {
                    let scaled = if hi[j] > lo[j] {
                        (x[j] - lo[j]) / (hi[j] - lo[j])
                    } else {
                        0.0
                    };
                    write_line(
                        &mut out,
                        &json!({
                            "type": "point",
                            "instance": e.instance,
                            "feature": names[j],
                            "shap_value": e.phi[j],
                            "feature_value": x[j],
                            "feature_value_normalized": scaled,
                        }),
                    )?;
                }
            }
            let rows: Vec<&[f64]> = ordered.iter().map(|e| e.phi.as_slice()).collect();
            for (rank, (name, mean)) in rank_rows(&rows, names).entries.into_iter().enumerate() {
                write_line(
                    &mut out,
                    &json!({"type": "bar", "rank": rank + 1, "feature": name, "mean_abs_shap": mean}),
                )?;
            }
        }
        PlotKind::Force { position } => {
            let e = explanations
                .get(*position)
                .ok_or_else(|| Error::Contract(format!("no explanation at position {position}")))?;
            write_line(&mut out, &header)?;
            write_line(
                &mut out,
                &json!({
                    "type": "force",
                    "instance": e.instance,
                    "base_value": e.base_value,
                    "model_output": e.model_output,
                    "features": names,
                    "feature_values": inputs.row(e.instance),
                    "phi": e.phi,
                }),
            )?;
        }
        PlotKind::Dependence { feature } => {
            let j = schema
                .index_of(feature)
                .ok_or_else(|| Error::Schema(format!("unknown feature '{feature}'")))?;
            header["feature"] = json!(feature);
            write_line(&mut out, &header)?;
            for e in &ordered {
                write_line(
                    &mut out,
                    &json!({
                        "type": "dependence",
                        "instance": e.instance,
                        "feature_value": inputs.row(e.instance)[j],
                        "shap_value": e.phi[j],
                    }),
                )?;
            }
        }
    }
    out.flush().map_err(|e| Error::io("<plot output>", e))
}

/// One row per instance: `instance, <features…>, base_value, model_output`.
pub fn write_shap_csv<W: Write>(
    explanations: &[ShapExplanation],
    schema: &FeatureSchema,
    comment: &[String],
    mut out: W,
) -> Result<()> {
    for line in comment {
        writeln!(out, "# {line}").map_err(|e| Error::io("<shap csv>", e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["instance".to_string()];
    header.extend(schema.feature_names.iter().cloned());
    header.push("base_value".into());
    header.push("model_output".into());
    w.write_record(&header)?;
    for e in explanations {
        let mut rec = vec![e.instance.to_string()];
        rec.extend(e.phi.iter().map(|&v| crate::real::format(v)));
        rec.push(crate::real::format(e.base_value));
        rec.push(crate::real::format(e.model_output));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<shap csv>", e))
}

/// Parse a SHAP CSV back into explanations and the feature names.
pub fn read_shap_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<ShapExplanation>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let expect = |i: usize, name: &str| cols.get(i) == Some(&name);
    let n = cols.len();
    if n < 4
        || !expect(0, "instance")
        || !expect(n - 2, "base_value")
        || !expect(n - 1, "model_output")
    {
        return Err(Error::Schema(
            "SHAP CSV must have columns instance, <features...>, base_value, model_output".into(),
        ));
    }
    let names: Vec<String> = cols[1..n - 2].iter().map(|s| s.to_string()).collect();
    if let Some(bad) = names
        .iter()
        .find(|n| RESERVED_COLUMNS.contains(&n.as_str()))
    {
        return Err(Error::Schema(format!(
            "reserved column name '{bad}' used as a feature"
        )));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let cell = rec.get(i).unwrap_or("");
            crate::real::parse(cell).ok_or_else(|| Error::Parse {
                row: row + 1,
                column: cols[i].to_string(),
                message: format!("'{cell}' is not a number"),
            })
        };
        let instance = rec
            .get(0)
            .unwrap_or("")
            .parse::<usize>()
            .map_err(|_| Error::Parse {
                row: row + 1,
                column: "instance".into(),
                message: "not an instance index".into(),
            })?;
        out.push(ShapExplanation {
            instance,
            phi: (1..n - 2).map(num).collect::<Result<_>>()?,
            base_value: num(n - 2)?,
            model_output: num(n - 1)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Data("SHAP CSV has no rows".into()));
    }
    Ok((names, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<ShapExplanation>, Dataset, ExportContext) {
        let schema =
            FeatureSchema::new(vec!["a".into(), "b".into(), "c".into()], "y", "1").unwrap();
        let ds = Dataset::from_rows(schema, vec![vec![1.0, 2.0, 3.0], vec![4.0, 2.0, 0.0]], None)
            .unwrap();
        let ex = vec![
            ShapExplanation {
                instance: 0,
                phi: vec![0.5, -0.25, 0.0],
                base_value: 1.0,
                model_output: 1.25,
            },
            ShapExplanation {
                instance: 1,
                phi: vec![-1.0, 0.0, 2.0],
                base_value: 1.0,
                model_output: 2.0,
            },
        ];
        let ctx = ExportContext {
            model: "gbt".into(),
            explained_quantity: "log_odds_margin".into(),
            dataset: "fixture.csv".into(),
            config_hash: "abc".into(),
            seed: 7,
        };
        (ex, ds, ctx)
    }

    fn render(kind: &PlotKind) -> Result<Vec<Value>> {
        let (ex, ds, ctx) = fixture();
        let mut buf = Vec::new();
        export_explanations(&ex, &ds, kind, &ctx, &mut buf)?;
        Ok(String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect())
    }

    #[test]
    fn summary_record_counts() {
        let lines = render(&PlotKind::Summary).unwrap();
        assert_eq!(lines[0]["type"], "header");
        assert_eq!(lines.iter().filter(|l| l["type"] == "point").count(), 6);
        assert_eq!(lines.iter().filter(|l| l["type"] == "bar").count(), 3);
        let b = lines
            .iter()
            .find(|l| l["type"] == "point" && l["feature"] == "b")
            .unwrap();
        assert_eq!(b["feature_value_normalized"], 0.0);
    }

    #[test]
    fn force_record_is_additive() {
        let lines = render(&PlotKind::Force { position: 1 }).unwrap();
        let f = &lines[1];
        let phi: f64 = f["phi"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .sum();
        assert!(
            (f["base_value"].as_f64().unwrap() + phi - f["model_output"].as_f64().unwrap()).abs()
                < 1e-12
        );
    }

    #[test]
    fn dependence_unknown_feature() {
        assert!(matches!(
            render(&PlotKind::Dependence {
                feature: "zzz".into()
            }),
            Err(Error::Schema(_))
        ));
        let lines = render(&PlotKind::Dependence {
            feature: "c".into(),
        })
        .unwrap();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2]["shap_value"], 2.0);
    }

    #[test]
    fn export_is_byte_stable() {
        let (ex, ds, ctx) = fixture();
        let run = || {
            let mut buf = Vec::new();
            export_explanations(&ex, &ds, &PlotKind::Summary, &ctx, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shap_csv_round_trip() {
        let (ex, ds, _) = fixture();
        let mut buf = Vec::new();
        write_shap_csv(&ex, ds.schema(), &["seed=7".into()], &mut buf).unwrap();
        let (names, back) = read_shap_csv(buf.as_slice()).unwrap();
        assert_eq!(names, vec!["a", "b", "c"]);
        assert_eq!(back, ex);
        assert!(matches!(
            read_shap_csv("instance,a,base_value,model_output\n".as_bytes()),
            Err(Error::Data(_))
        ));
    }
}
