//! Dollar cost accounting with exact decimal arithmetic.

use std::collections::BTreeMap;
use std::str::FromStr;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Deserializer, Serialize};

const MILLION: i64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPrice {
    #[serde(deserialize_with = "decimal_from_number_or_string")]
    pub usd_per_million_input_tokens: Decimal,
    #[serde(deserialize_with = "decimal_from_number_or_string")]
    pub usd_per_million_output_tokens: Decimal,
}

fn decimal_from_number_or_string<'de, D: Deserializer<'de>>(de: D) -> Result<Decimal, D::Error> {
    let value = serde_json::Value::deserialize(de)?;
    let text = match &value {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Number(n) => n.to_string(),
        other => return Err(serde::de::Error::custom(format!("expected a price, got {other}"))),
    };
    Decimal::from_str(&text)
        .or_else(|_| Decimal::from_scientific(&text))
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("no price configured for model `{0}`")]
    UnknownModelPrice(String),
    #[error("negative price for model `{0}`")]
    NegativePrice(String),
    #[error("invalid price table: {0}")]
    InvalidPriceTable(String),
}

/// Per-model prices in USD per million tokens. JSON form:
/// `{"gpt-5": {"usd_per_million_input_tokens": "1.25", "usd_per_million_output_tokens": "10"}}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PriceTable {
    prices: BTreeMap<String, ModelPrice>,
}

impl PriceTable {
    pub fn new(prices: BTreeMap<String, ModelPrice>) -> Result<Self, CostError> {
        for (model, p) in &prices {
            if p.usd_per_million_input_tokens.is_sign_negative() || p.usd_per_million_output_tokens.is_sign_negative() {
                return Err(CostError::NegativePrice(model.clone()));
            }
        }
        Ok(Self { prices })
    }

    pub fn from_json(text: &str) -> Result<Self, CostError> {
        let prices: BTreeMap<String, ModelPrice> =
            serde_json::from_str(text).map_err(|e| CostError::InvalidPriceTable(e.to_string()))?;
        Self::new(prices)
    }

    pub fn insert(&mut self, model_id: impl Into<String>, input: Decimal, output: Decimal) -> Result<(), CostError> {
        let model_id = model_id.into();
        if input.is_sign_negative() || output.is_sign_negative() {
            return Err(CostError::NegativePrice(model_id));
        }
        self.prices.insert(
            model_id,
            ModelPrice {
                usd_per_million_input_tokens: input,
                usd_per_million_output_tokens: output,
            },
        );
        Ok(())
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelPrice> {
        self.prices.get(model_id)
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.prices.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallUsage {
    pub label: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl CallUsage {
    pub fn new(label: impl Into<String>, input_tokens: u64, output_tokens: u64) -> Self {
        Self {
            label: label.into(),
            input_tokens,
            output_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallCost {
    pub label: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub usd: Decimal,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostReport {
    pub per_call: Vec<CallCost>,
    pub total_usd: Decimal,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
}

pub fn call_cost(input_tokens: u64, output_tokens: u64, price: &ModelPrice) -> Decimal {
    let million = Decimal::from(MILLION);
    Decimal::from(input_tokens) * price.usd_per_million_input_tokens / million
        + Decimal::from(output_tokens) * price.usd_per_million_output_tokens / million
}

pub fn accumulate_cost(calls: &[CallUsage], model_id: &str, prices: &PriceTable) -> Result<CostReport, CostError> {
    let price = prices
        .get(model_id)
        .ok_or_else(|| CostError::UnknownModelPrice(model_id.to_owned()))?;
    let mut report = CostReport::default();
    for call in calls {
        let usd = call_cost(call.input_tokens, call.output_tokens, price);
        report.total_usd += usd;
        report.total_input_tokens += call.input_tokens;
        report.total_output_tokens += call.output_tokens;
        report.per_call.push(CallCost {
            label: call.label.clone(),
            input_tokens: call.input_tokens,
            output_tokens: call.output_tokens,
            usd,
        });
    }
    Ok(report)
}

/// Four fraction digits, half away from zero: `2.25` becomes `"2.2500"`.
pub fn format_usd(amount: Decimal) -> String {
    let rounded = amount.round_dp_with_strategy(4, RoundingStrategy::MidpointAwayFromZero);
    format!("{rounded:.4}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    fn table() -> PriceTable {
        let mut t = PriceTable::default();
        t.insert("m", dec("1.25"), dec("10")).unwrap();
        t
    }

    #[test]
    fn single_call() {
        let r = accumulate_cost(&[CallUsage::new("s1", 1_000_000, 100_000)], "m", &table()).unwrap();
        assert_eq!(r.total_usd, dec("2.25"));
        assert_eq!(format_usd(r.total_usd), "2.2500");
    }

    #[test]
    fn zero_calls() {
        let r = accumulate_cost(&[], "m", &table()).unwrap();
        assert_eq!(r.total_usd, Decimal::ZERO);
        assert_eq!(format_usd(r.total_usd), "0.0000");
        assert_eq!(r.total_input_tokens, 0);
    }

    #[test]
    fn unknown_model() {
        assert!(matches!(
            accumulate_cost(&[], "nope", &table()),
            Err(CostError::UnknownModelPrice(m)) if m == "nope"
        ));
    }

    #[test]
    fn parses_numbers_and_strings() {
        let t = PriceTable::from_json(
            r#"{"a": {"usd_per_million_input_tokens": 1.25, "usd_per_million_output_tokens": "10.00"}}"#,
        )
        .unwrap();
        let p = t.get("a").unwrap();
        assert_eq!(p.usd_per_million_input_tokens, dec("1.25"));
        assert_eq!(p.usd_per_million_output_tokens, dec("10"));
    }

    #[test]
    fn rejects_negative_prices() {
        let err =
            PriceTable::from_json(r#"{"a": {"usd_per_million_input_tokens": -1, "usd_per_million_output_tokens": 1}}"#)
                .unwrap_err();
        assert!(matches!(err, CostError::NegativePrice(_)));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(format_usd(dec("0.00005")), "0.0001");
        assert_eq!(format_usd(dec("1.19")), "1.1900");
        assert_eq!(format_usd(dec("0.123449")), "0.1234");
    }
}
