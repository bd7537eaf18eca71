use std::fmt;
use std::str::FromStr;

/// Seed list parsed from forms like `7`, `1..10`, `1..=10` or `1,4,6..8`.
/// Ranges are inclusive at both ends, so `1..10` is ten seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet(pub Vec<u64>);

impl SeedSet {
    pub fn single(seed: u64) -> Self {
        SeedSet(vec![seed])
    }
}

impl FromStr for SeedSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            if part.is_empty() {
                return Err(format!("empty seed in `{s}`"));
            }
            let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad seed `{t}` in `{s}`"));
            match part.split_once("..") {
                Some((lo, hi)) => {
                    let (lo, hi) = (num(lo)?, num(hi.strip_prefix('=').unwrap_or(hi))?);
                    if lo > hi {
                        return Err(format!("empty seed range `{part}`"));
                    }
                    out.extend(lo..=hi);
                }
                None => out.push(num(part)?),
            }
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|s| seen.insert(*s));
        Ok(SeedSet(out))
    }
}

impl fmt::Display for SeedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!("7".parse::<SeedSet>().unwrap().0, [7]);
        assert_eq!("1..10".parse::<SeedSet>().unwrap().0, (1..=10).collect::<Vec<_>>());
        assert_eq!("1..=3".parse::<SeedSet>().unwrap().0, [1, 2, 3]);
        assert_eq!("5, 1..2,5".parse::<SeedSet>().unwrap().0, [5, 1, 2]);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "x", "3..1", "1,,2", "-1", "1..x"] {
            assert!(bad.parse::<SeedSet>().is_err(), "{bad}");
        }
    }
}
