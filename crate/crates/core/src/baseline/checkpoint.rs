//! Text checkpoint for [`FactorModel`].
//!
//! ```text
//! #poprerank-model,1
//! #dims,<users>,<items>,<factors>
//! #hyperparams,<factors>,<regularization>,<iterations>,<seed>
//! user,<id>,1,<f0>,...
//! item,<id>,<observed 0|1>,<f0>,...
//! ```
//!
//! Values use the shortest round-trip decimal form, so a reload is exact.

use std::io::{Read, Write};

use super::rank_als::{FactorModel, Hyperparams};
use crate::error::{Error, Result};
use crate::ingest::{RatingsTable, Vocab};
use crate::scalar::Scalar;

const MAGIC: &str = "#poprerank-model";
const VERSION: &str = "1";

pub fn write_checkpoint<T: Scalar, W: Write>(
    model: &FactorModel<T>,
    table: &RatingsTable,
    writer: W,
) -> Result<()> {
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let hp = model.hyperparams();
    out.write_record([MAGIC, VERSION])?;
    out.write_record([
        "#dims".to_string(),
        model.n_users().to_string(),
        model.n_items().to_string(),
        model.factors().to_string(),
    ])?;
    out.write_record([
        "#hyperparams".to_string(),
        hp.factors.to_string(),
        hp.regularization.to_string(),
        hp.iterations.to_string(),
        hp.seed.to_string(),
    ])?;
    let f = model.factors();
    for (u, row) in model.user_factors().chunks_exact(f).enumerate() {
        let mut rec = vec![
            "user".to_string(),
            table.users().name(u as u32).to_string(),
            "1".into(),
        ];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    for (i, row) in model.item_factors().chunks_exact(f).enumerate() {
        let observed = if model.observed[i] { "1" } else { "0" };
        let mut rec = vec![
            "item".to_string(),
            table.items().name(i as u32).to_string(),
            observed.into(),
        ];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<checkpoint>", e))?;
    Ok(())
}

/// Loads a checkpoint together with the user and item vocabularies it was
/// written against.
pub fn read_checkpoint<T: Scalar, R: Read>(reader: R) -> Result<(FactorModel<T>, Vocab, Vocab)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let mut input = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = input.records();
    let mut next = || -> Result<csv::StringRecord> {
        rows.next()
            .ok_or_else(|| bad("truncated"))?
            .map_err(Error::from)
    };
    let head = next()?;
    if head.get(0) != Some(MAGIC) || head.get(1) != Some(VERSION) {
        return Err(bad("missing or unsupported version header"));
    }
    let int = |s: Option<&str>| -> Result<usize> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad integer"))
    };
    let dims = next()?;
    if dims.get(0) != Some("#dims") {
        return Err(bad("missing #dims"));
    }
    let (nu, ni, f) = (int(dims.get(1))?, int(dims.get(2))?, int(dims.get(3))?);
    let hp_row = next()?;
    if hp_row.get(0) != Some("#hyperparams") {
        return Err(bad("missing #hyperparams"));
    }
    let hyperparams = Hyperparams {
        factors: int(hp_row.get(1))?,
        regularization: hp_row
            .get(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad regularization"))?,
        iterations: int(hp_row.get(3))?,
        seed: hp_row
            .get(4)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad seed"))?,
    };
    let mut names = (Vec::with_capacity(nu), Vec::with_capacity(ni));
    let mut user_factors = Vec::with_capacity(nu * f);
    let mut item_factors = Vec::with_capacity(ni * f);
    let mut observed = Vec::with_capacity(ni);
    for _ in 0..nu + ni {
        let row = next()?;
        if row.len() != f + 3 {
            return Err(bad("row width does not match factor count"));
        }
        let values = row.iter().skip(3).map(|v| {
            v.parse::<f64>()
                .map(T::of)
                .map_err(|_| bad("bad factor value"))
        });
        match &row[0] {
            "user" => {
                names.0.push(row[1].to_string());
                for v in values {
                    user_factors.push(v?);
                }
            }
            "item" => {
                names.1.push(row[1].to_string());
                observed.push(&row[2] == "1");
                for v in values {
                    item_factors.push(v?);
                }
            }
            _ => return Err(bad("unknown row kind")),
        }
    }
    if names.0.len() != nu || names.1.len() != ni {
        return Err(bad("row counts do not match #dims"));
    }
    let model = FactorModel {
        n_users: nu,
        n_items: ni,
        factors: f,
        user_factors,
        item_factors,
        observed,
        hyperparams,
    };
    Ok((model, Vocab::from_ids(names.0), Vocab::from_ids(names.1)))
}
