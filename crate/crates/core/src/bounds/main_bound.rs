use serde::{Deserialize, Serialize};

use super::weights::WeightSystem;

/// Which main estimate is assembled: the bounded-diffusion form or the
/// general form with the two extra constants `c₈`, `c₉`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundVariant {
    Bounded,
    General,
}

/// Right-hand side of the main estimate as a multiple of `C₁`:
///
/// `c₁^{k/2}S + (c₁^{k/2}(b₀−b)^{−k/2} + c₂ᵏ + c₃^{k/2} + c₄^{k/2})I₁
///  + (c₂^{k/2}c₆^{k/2} + c₅ᵏ + c₆ᵏ + c₇ᵏ)I₂`,
///
/// with `c₈^{k/2}` added to the `I₁` group and `c₉ᵏ` to the `I₂` group for
/// [`BoundVariant::General`].
pub fn main_bound_from_constants(
    c: &[f64; 9],
    k: f64,
    gap: f64,
    sup_zeta1: f64,
    int_zeta1: f64,
    int_zeta2: f64,
    variant: BoundVariant,
) -> f64 {
    let h = 0.5 * k;
    let mut g1 = c[0].powf(h) / gap.powf(h) + c[1].powf(k) + c[2].powf(h) + c[3].powf(h);
    let mut g2 = c[1].powf(h) * c[5].powf(h) + c[4].powf(k) + c[5].powf(k) + c[6].powf(k);
    if variant == BoundVariant::General {
        g1 += c[7].powf(h);
        g2 += c[8].powf(k);
    }
    c[0].powf(h) * sup_zeta1 + g1 * int_zeta1 + g2 * int_zeta2
}

/// [`main_bound_from_constants`] with the constants and `b₀ − b` of `ws`.
pub fn assemble_main_bound(
    ws: &WeightSystem,
    sup_zeta1: f64,
    int_zeta1: f64,
    int_zeta2: f64,
    variant: BoundVariant,
) -> f64 {
    main_bound_from_constants(
        &ws.constants,
        ws.k,
        ws.window.b0 - ws.window.b,
        sup_zeta1,
        int_zeta1,
        int_zeta2,
        variant,
    )
}
