//! Linear token-cost model.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Dollars per 1000 prompt and completion tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingTable<T> {
    pub prompt_price: T,
    pub completion_price: T,
}

impl<T: Scalar> PricingTable<T> {
    pub fn new(prompt_price: T, completion_price: T) -> Self {
        Self {
            prompt_price,
            completion_price,
        }
    }

    /// $0.005 / 1K prompt and $0.015 / 1K completion tokens, the hosted
    /// rates the pipeline's budget figures are quoted at.
    pub fn hosted_default() -> Self {
        let thousand = T::from_u32(1000).unwrap();
        Self::new(
            T::from_u32(5).unwrap() / thousand,
            T::from_u32(15).unwrap() / thousand,
        )
    }
}

impl Default for PricingTable<f64> {
    fn default() -> Self {
        Self::hosted_default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
        }
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: Self) -> Self {
        TokenUsage::new(
            self.prompt_tokens + rhs.prompt_tokens,
            self.completion_tokens + rhs.completion_tokens,
        )
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate<T> {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub prompt_price: T,
    pub completion_price: T,
    pub total_dollars: T,
}

impl<T: Scalar> CostEstimate<T> {
    pub fn usage(&self) -> TokenUsage {
        TokenUsage::new(self.prompt_tokens, self.completion_tokens)
    }
}

impl Default for CostEstimate<f64> {
    fn default() -> Self {
        estimate_cost(0, 0, &PricingTable::default())
    }
}

fn tokens<T: Scalar>(n: u64) -> T {
    T::from_u64(n).expect("token count not representable")
}

fn call_dollars<T: Scalar>(usage: TokenUsage, pricing: &PricingTable<T>) -> T {
    let thousand = T::from_u32(1000).unwrap();
    tokens::<T>(usage.prompt_tokens) / thousand * pricing.prompt_price
        + tokens::<T>(usage.completion_tokens) / thousand * pricing.completion_price
}

pub fn estimate_cost<T: Scalar>(
    prompt_tokens: u64,
    completion_tokens: u64,
    pricing: &PricingTable<T>,
) -> CostEstimate<T> {
    CostEstimate {
        prompt_tokens,
        completion_tokens,
        prompt_price: pricing.prompt_price,
        completion_price: pricing.completion_price,
        total_dollars: call_dollars(TokenUsage::new(prompt_tokens, completion_tokens), pricing),
    }
}

/// Typical token usage of one parse call and one generation call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerCallTokens {
    pub parse: TokenUsage,
    pub generate: TokenUsage,
}

/// Dollars for one drawing/template pair: every note parsed once, every
/// substep generated once.
pub fn estimate_pair_cost<T: Scalar>(
    n_notes: u64,
    n_substeps: u64,
    per_call: &PerCallTokens,
    pricing: &PricingTable<T>,
) -> T {
    tokens::<T>(n_notes) * call_dollars(per_call.parse, pricing)
        + tokens::<T>(n_substeps) * call_dollars(per_call.generate, pricing)
}
