//! Scenario documents bundled with the binary.

/// `(name, document)` for every bundled figure.
pub const FIGURES: &[(&str, &str)] = &[
    ("fig2", include_str!("../assets/fig2.json")),
    ("fig3", include_str!("../assets/fig3.json")),
    ("fig4", include_str!("../assets/fig4.json")),
    ("fig5", include_str!("../assets/fig5.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    FIGURES.iter().find(|(n, _)| *n == name).map(|(_, doc)| *doc)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    FIGURES.iter().map(|(n, _)| *n)
}
