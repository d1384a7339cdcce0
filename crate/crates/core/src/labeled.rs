//! Labeled training samples contrasting the simulator with the reference.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, AcoreError, Result};
use crate::model_zoo::{ModelSpec, Region};
use crate::rng::{fork, stream, SimRng};

/// One (θ, x, y) triple; `y` is true when x was drawn from F_θ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
    pub y: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub examples: Vec<LabeledExample>,
    pub bernoulli_p: f64,
}

impl LabeledSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn label_fraction(&self) -> f64 {
        self.examples.iter().filter(|e| e.y).count() as f64 / self.len() as f64
    }

    /// Splits off the last `fraction` of the examples.
    pub fn split(&self, fraction: f64) -> (LabeledSet, LabeledSet) {
        let cut = self.len() - ((self.len() as f64 * fraction).round() as usize).min(self.len());
        let (a, b) = self.examples.split_at(cut);
        (
            LabeledSet { examples: a.to_vec(), bernoulli_p: self.bernoulli_p },
            LabeledSet { examples: b.to_vec(), bernoulli_p: self.bernoulli_p },
        )
    }

    /// One CSV row per example: θ components, x components, y.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.examples.first() else {
            w.flush()?;
            return Ok(());
        };
        let mut header: Vec<String> = (0..first.theta.len()).map(|i| format!("theta{i}")).collect();
        header.extend((0..first.x.len()).map(|i| format!("x{i}")));
        header.push("y".into());
        w.write_record(&header)?;
        for e in &self.examples {
            let mut rec: Vec<String> = e.theta.iter().chain(&e.x).map(|v| v.to_string()).collect();
            rec.push(u8::from(e.y).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, bernoulli_p: f64) -> Result<LabeledSet> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let n_theta = headers.iter().filter(|h| h.starts_with("theta")).count();
        let n_x = headers.iter().filter(|h| h.starts_with('x')).count();
        let mut examples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| AcoreError::InvalidInput(format!("row {}: {e}", line + 2)))?;
            if vals.len() != n_theta + n_x + 1 {
                return Err(AcoreError::InvalidInput(format!("row {}: wrong column count", line + 2)));
            }
            examples.push(LabeledExample {
                theta: vals[..n_theta].to_vec(),
                x: vals[n_theta..n_theta + n_x].to_vec(),
                y: vals[n_theta + n_x] != 0.0,
            });
        }
        Ok(LabeledSet { examples, bernoulli_p })
    }
}

/// Draws B examples: θᵢ ~ r_Θ, Yᵢ ~ Ber(p), Xᵢ ~ F_θᵢ when Yᵢ = 1 and
/// Xᵢ ~ G otherwise. Example i uses its own random stream.
pub fn generate_labeled_sample(model: &ModelSpec, b: usize, p: f64, rng: &mut SimRng) -> Result<LabeledSet> {
    if b == 0 {
        return domain("labeled sample size must be at least 1");
    }
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("bernoulli p must lie in (0, 1], got {p}"));
    }
    let base = fork(rng);
    let proposal = &model.proposal;
    let examples = (0..b)
        .into_par_iter()
        .map(|i| draw_example(model, proposal, p, &mut stream(base, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledSet { examples, bernoulli_p: p })
}

fn draw_example(model: &ModelSpec, proposal: &Region, p: f64, rng: &mut SimRng) -> Result<LabeledExample> {
    let theta = model.prior_draw(proposal, rng)?;
    let y = rng.random::<f64>() < p;
    let mut x = vec![0.0; model.data_dim()];
    if y {
        model.simulate_into(&theta, rng, &mut x);
    } else {
        model.reference_into(rng, &mut x);
    }
    Ok(LabeledExample { theta, x, y })
}
