//! Reference offspring laws used throughout the tests and suites.

use crate::offspring::OffspringLaw;

/// `p_0 = 0.6, p_2 = 0.4`: mean 0.8, variance 0.96.
pub fn law_a() -> OffspringLaw {
    OffspringLaw::from_pairs(&[(0, 0.6), (2, 0.4)]).expect("law A is valid")
}

/// `p_0 = 0.5, p_1 = 0.2, p_2 = 0.2, p_3 = 0.1`: mean 0.9, variance 1.09.
pub fn law_b() -> OffspringLaw {
    OffspringLaw::from_pairs(&[(0, 0.5), (1, 0.2), (2, 0.2), (3, 0.1)]).expect("law B is valid")
}

/// Looks up a builtin law by name (`"A"` or `"B"`, case-insensitive).
pub fn by_name(name: &str) -> Option<OffspringLaw> {
    match name.to_ascii_uppercase().as_str() {
        "A" | "LAW_A" | "LAW-A" => Some(law_a()),
        "B" | "LAW_B" | "LAW-B" => Some(law_b()),
        _ => None,
    }
}
