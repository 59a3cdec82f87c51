//! Configurations: integer partitions describing how `k` lineages share sites.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Multiset of occupation counts, stored non-increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(Vec<u32>);

impl Configuration {
    /// Canonicalises `parts`: zeros dropped, sorted non-increasing.
    pub fn new(mut parts: Vec<u32>) -> Self {
        parts.retain(|&p| p > 0);
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Configuration(parts)
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    /// Number of lineages `k`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Number of occupied sites `l`.
    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn is_all_ones(&self) -> bool {
        self.0.iter().all(|&p| p == 1)
    }

    /// Parses `{2,1,1}` or `2,1,1`.
    pub fn parse(text: &str) -> Option<Self> {
        let inner = text.trim().trim_start_matches('{').trim_end_matches('}');
        let parts = inner
            .split(',')
            .map(|s| s.trim().parse::<u32>().ok().filter(|&p| p > 0))
            .collect::<Option<Vec<u32>>>()?;
        Some(Configuration::new(parts))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

/// All partitions of `k` in reverse-lexicographic order (`{k}` first,
/// `{1,..,1}` last). Empty for `k == 0`.
pub fn partitions(k: u32) -> Vec<Configuration> {
    fn extend(remaining: u32, max_part: u32, prefix: &mut Vec<u32>, out: &mut Vec<Configuration>) {
        if remaining == 0 {
            out.push(Configuration(prefix.clone()));
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            extend(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        extend(k, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Multiplicities of the distinct values in `x`.
pub fn configuration_of<T: Ord>(x: &[T]) -> Configuration {
    let mut sorted: Vec<&T> = x.iter().collect();
    sorted.sort();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        parts.push((j - i) as u32);
        i = j;
    }
    Configuration::new(parts)
}
