use std::cmp::Ordering;

/// Tie-breaking order shared by every policy: utility descending, then
/// severity ascending, then option id ascending.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate<'a> {
    pub id: &'a str,
    pub utility: f64,
    pub severity: f64,
}

pub(crate) fn by_preference(a: &Candidate<'_>, b: &Candidate<'_>) -> Ordering {
    b.utility
        .total_cmp(&a.utility)
        .then_with(|| a.severity.total_cmp(&b.severity))
        .then_with(|| a.id.cmp(b.id))
}

pub(crate) fn most_preferred<'a>(candidates: impl IntoIterator<Item = Candidate<'a>>) -> Option<Candidate<'a>> {
    candidates.into_iter().min_by(by_preference)
}
