//! Churn-shaped synthetic records for demos and tests when the real file is
//! not at hand. Marginals roughly follow the public data; the outcome comes
//! from a logistic model driven mostly by age, product count, activity,
//! country and balance.

use rand::Rng;

use crate::data::{churn_schema, map_outcome_labels, ColumnData, Dataset};
use crate::error::Result;
use crate::seed;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; 1 - u keeps the log argument away from zero
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

/// `n` labeled records under the churn schema.
pub fn synthetic_churn(n: usize, seed_value: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed::derive(seed_value, "synth", 0));
    let mut ids = Vec::with_capacity(n);
    let mut surnames = Vec::with_capacity(n);
    let mut credit = Vec::with_capacity(n);
    let mut geo = Vec::with_capacity(n);
    let mut gender = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut tenure = Vec::with_capacity(n);
    let mut balance = Vec::with_capacity(n);
    let mut products = Vec::with_capacity(n);
    let mut card = Vec::with_capacity(n);
    let mut active = Vec::with_capacity(n);
    let mut salary = Vec::with_capacity(n);
    let mut exited = Vec::with_capacity(n);

    for i in 0..n {
        ids.push((15_565_701 + i).to_string());
        surnames.push(format!("S{i:05}"));
        let cs = (650.0 + 96.0 * normal(&mut rng)).round().clamp(350.0, 850.0);
        let g = match rng.gen_range(0..4) {
            0 | 1 => "France",
            2 => "Germany",
            _ => "Spain",
        };
        let female = rng.gen_bool(0.45);
        let a = (37.0 * (0.25 * normal(&mut rng)).exp()).round().clamp(18.0, 92.0);
        let t = rng.gen_range(0..=10) as f64;
        let zero_balance = g != "Germany" && rng.gen_bool(0.48);
        let b = if zero_balance {
            0.0
        } else {
            ((119_800.0 + 30_000.0 * normal(&mut rng)).max(3_000.0) * 100.0).round() / 100.0
        };
        let p = match rng.gen_range(0..100) {
            0..=49 => 1.0,
            50..=95 => 2.0,
            96..=98 => 3.0,
            _ => 4.0,
        };
        let has_card = rng.gen_bool(0.7);
        let is_active = rng.gen_bool(0.515);
        let s = (rng.gen_range(11.58..199_992.48_f64) * 100.0).round() / 100.0;

        let z = -1.55 + 0.075 * (a - 38.0) + if g == "Germany" { 0.75 } else { 0.0 }
            + if female { 0.5 } else { 0.0 }
            - if is_active { 1.0 } else { 0.0 }
            + match p as u8 {
                1 => 0.0,
                2 => -1.6,
                3 => 2.4,
                _ => 5.0,
            }
            + 2.5e-6 * b
            - 0.0007 * (cs - 650.0);
        let churned = rng.gen_bool(1.0 / (1.0 + (-z).exp()));

        credit.push(cs);
        geo.push(g.to_string());
        gender.push(if female { "Female" } else { "Male" }.to_string());
        age.push(a);
        tenure.push(t);
        balance.push(b);
        products.push(p);
        card.push(has_card as u8 as f64);
        active.push(is_active as u8 as f64);
        salary.push(s);
        exited.push(churned as u8 as f64);
    }

    let columns = vec![
        ColumnData::Text(ids),
        ColumnData::Text(surnames),
        ColumnData::Numeric(credit),
        ColumnData::Text(geo),
        ColumnData::Text(gender),
        ColumnData::Numeric(age),
        ColumnData::Numeric(tenure),
        ColumnData::Numeric(balance),
        ColumnData::Numeric(products),
        ColumnData::Numeric(card),
        ColumnData::Numeric(active),
        ColumnData::Numeric(salary),
        ColumnData::Numeric(exited),
    ];
    map_outcome_labels(&Dataset::from_columns(churn_schema(), columns)?)
}
