//! Mutual-information ranking of binary features against the class label.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::matrix::VectorMatrix;

/// Class-conditional presence counts for one feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub feature: String,
    /// n(r=1, c=suspicious)
    pub sus_pos: u64,
    /// n(r=1, c=benign)
    pub ben_pos: u64,
    pub n_sus: u64,
    pub n_ben: u64,
}

impl ContingencyTable {
    pub fn new(feature: impl Into<String>, ben_pos: u64, sus_pos: u64, n_ben: u64, n_sus: u64) -> Self {
        assert!(
            ben_pos <= n_ben && sus_pos <= n_sus,
            "positive count exceeds class size"
        );
        Self {
            feature: feature.into(),
            sus_pos,
            ben_pos,
            n_sus,
            n_ben,
        }
    }

    pub fn count(&self, present: bool, class: ClassLabel) -> u64 {
        match (present, class) {
            (true, ClassLabel::Suspicious) => self.sus_pos,
            (true, ClassLabel::Benign) => self.ben_pos,
            (false, ClassLabel::Suspicious) => self.n_sus - self.sus_pos,
            (false, ClassLabel::Benign) => self.n_ben - self.ben_pos,
        }
    }

    pub fn class_total(&self, class: ClassLabel) -> u64 {
        match class {
            ClassLabel::Suspicious => self.n_sus,
            ClassLabel::Benign => self.n_ben,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_sus + self.n_ben
    }

    /// Same table with the two classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            feature: self.feature.clone(),
            sus_pos: self.ben_pos,
            ben_pos: self.sus_pos,
            n_sus: self.n_ben,
            n_ben: self.n_sus,
        }
    }
}

/// Per-feature counts over a fully labeled matrix.
pub fn build_contingency(matrix: &VectorMatrix) -> Result<Vec<ContingencyTable>> {
    let mut tables: Vec<ContingencyTable> = matrix
        .features
        .iter()
        .map(|f| ContingencyTable {
            feature: f.clone(),
            sus_pos: 0,
            ben_pos: 0,
            n_sus: 0,
            n_ben: 0,
        })
        .collect();
    let (mut n_sus, mut n_ben) = (0, 0);
    for row in &matrix.rows {
        let label = row.label.ok_or_else(|| Error::Unlabeled(row.sample_id.clone()))?;
        match label {
            ClassLabel::Suspicious => n_sus += 1,
            ClassLabel::Benign => n_ben += 1,
        }
        for (table, &bit) in tables.iter_mut().zip(&row.bits) {
            if bit {
                match label {
                    ClassLabel::Suspicious => table.sus_pos += 1,
                    ClassLabel::Benign => table.ben_pos += 1,
                }
            }
        }
    }
    if n_ben == 0 {
        return Err(Error::EmptyClass("benign"));
    }
    if n_sus == 0 {
        return Err(Error::EmptyClass("suspicious"));
    }
    for t in &mut tables {
        t.n_sus = n_sus;
        t.n_ben = n_ben;
    }
    Ok(tables)
}

/// MI(R; C) in bits, with plug-in probabilities from the counts:
///
/// ```text
/// MI = Σ_r Σ_c P(r) · P(c|r) · log2( P(c|r) / P(c) )
/// ```
///
/// Empty cells contribute nothing (`0 · log 0 = 0`); no smoothing.
pub fn mutual_information(table: &ContingencyTable) -> f64 {
    assert!(table.n_sus >= 1 && table.n_ben >= 1, "both classes must be present");
    // identical presence rates: independent, exactly zero
    if table.sus_pos as u128 * table.n_ben as u128 == table.ben_pos as u128 * table.n_sus as u128 {
        return 0.0;
    }
    let n = table.total() as f64;
    let mut mi = 0.0;
    for present in [false, true] {
        let n_r = (table.count(present, ClassLabel::Benign) + table.count(present, ClassLabel::Suspicious)) as f64;
        if n_r == 0.0 {
            continue;
        }
        let p_r = n_r / n;
        for class in ClassLabel::ALL {
            let n_rc = table.count(present, class) as f64;
            if n_rc == 0.0 {
                continue;
            }
            let p_c_given_r = n_rc / n_r;
            let p_c = table.class_total(class) as f64 / n;
            mi += p_r * p_c_given_r * (p_c_given_r / p_c).log2();
        }
    }
    mi.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    pub feature: String,
    pub score: f64,
    pub benign_count: u64,
    pub malware_count: u64,
}

impl RankedFeature {
    pub fn total(&self) -> u64 {
        self.benign_count + self.malware_count
    }
}

/// Descending by score; equal scores ordered by ascending feature name.
pub fn rank_features(tables: &[ContingencyTable]) -> Vec<RankedFeature> {
    let mut scored: Vec<(f64, &ContingencyTable)> = tables.iter().map(|t| (mutual_information(t), t)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.feature.cmp(&b.1.feature)));
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, t))| RankedFeature {
            rank: i + 1,
            feature: t.feature.clone(),
            score,
            benign_count: t.ben_pos,
            malware_count: t.sus_pos,
        })
        .collect()
}

/// `rank,feature,benign_count,malware_count,total,infogain`, scores to 5 decimals.
pub fn ranking_csv(ranked: &[RankedFeature]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["rank", "feature", "benign_count", "malware_count", "total", "infogain"])
        .expect("in-memory write");
    for r in ranked {
        w.write_record([
            r.rank.to_string(),
            r.feature.clone(),
            r.benign_count.to_string(),
            r.malware_count.to_string(),
            r.total().to_string(),
            format!("{:.5}", r.score),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Named feature-selection settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Ranks 1–5.
    FiveTop,
    /// Ranks 16–20: the five lowest of the top twenty.
    FiveLow,
    Ten,
    Fifteen,
    Twenty,
    /// Ranks 1–n.
    Top(usize),
}

impl Preset {
    pub const NAMED: [Preset; 5] = [
        Preset::FiveLow,
        Preset::FiveTop,
        Preset::Ten,
        Preset::Fifteen,
        Preset::Twenty,
    ];

    /// Zero-based rank range selected by this preset.
    pub fn ranks(self) -> std::ops::Range<usize> {
        match self {
            Preset::FiveTop => 0..5,
            Preset::FiveLow => 15..20,
            Preset::Ten => 0..10,
            Preset::Fifteen => 0..15,
            Preset::Twenty => 0..20,
            Preset::Top(n) => 0..n,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::FiveTop => f.write_str("5fT"),
            Preset::FiveLow => f.write_str("5fL"),
            Preset::Ten => f.write_str("10f"),
            Preset::Fifteen => f.write_str("15f"),
            Preset::Twenty => f.write_str("20f"),
            Preset::Top(n) => write!(f, "top-{n}"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "5fT" => Ok(Preset::FiveTop),
            "5fL" => Ok(Preset::FiveLow),
            "10f" => Ok(Preset::Ten),
            "15f" => Ok(Preset::Fifteen),
            "20f" => Ok(Preset::Twenty),
            other => match other.strip_prefix("top-").map(str::parse::<usize>) {
                Some(Ok(n)) if n > 0 => Ok(Preset::Top(n)),
                _ => Err(Error::Invalid(format!(
                    "unknown feature preset `{other}` (expected 5fT, 5fL, 10f, 15f, 20f or top-N)"
                ))),
            },
        }
    }
}

impl Serialize for Preset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub preset: Preset,
    pub features: Vec<String>,
}

pub fn select_top(ranked: &[RankedFeature], preset: Preset) -> Result<FeatureSelection> {
    let range = preset.ranks();
    if ranked.len() < range.end {
        return Err(Error::InsufficientFeatures {
            required: range.end,
            available: ranked.len(),
        });
    }
    Ok(FeatureSelection {
        preset,
        features: ranked[range].iter().map(|r| r.feature.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureVector;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    /// H(C) + H(R) − H(R, C) straight from the four joint cells.
    fn entropy_oracle(t: &ContingencyTable) -> f64 {
        let n = t.total() as f64;
        let h = |ps: &[f64]| -> f64 { ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum() };
        let cells = [
            t.ben_pos as f64 / n,
            (t.n_ben - t.ben_pos) as f64 / n,
            t.sus_pos as f64 / n,
            (t.n_sus - t.sus_pos) as f64 / n,
        ];
        let h_c = h(&[t.n_ben as f64 / n, t.n_sus as f64 / n]);
        let h_r = h(&[
            (t.ben_pos + t.sus_pos) as f64 / n,
            (t.total() - t.ben_pos - t.sus_pos) as f64 / n,
        ]);
        h_c + h_r - h(&cells)
    }

    /// H(C) − H(C | R), the information-gain form.
    fn info_gain_oracle(t: &ContingencyTable) -> f64 {
        let n = t.total() as f64;
        let h2 = |a: f64, b: f64| -> f64 {
            let s = a + b;
            [a, b]
                .iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| -(x / s) * (x / s).log2())
                .sum()
        };
        let h_c = h2(t.n_ben as f64, t.n_sus as f64);
        let pos = (t.ben_pos + t.sus_pos) as f64;
        let neg = n - pos;
        let mut h_c_given_r = 0.0;
        if pos > 0.0 {
            h_c_given_r += pos / n * h2(t.ben_pos as f64, t.sus_pos as f64);
        }
        if neg > 0.0 {
            h_c_given_r += neg / n * h2((t.n_ben - t.ben_pos) as f64, (t.n_sus - t.sus_pos) as f64);
        }
        h_c - h_c_given_r
    }

    fn table(ben: u64, mal: u64) -> ContingencyTable {
        ContingencyTable::new("f", ben, mal, 1000, 1000)
    }

    #[test]
    fn reference_scores() {
        for (ben, mal, expected) in [
            (20, 591, 0.32920),
            (11, 466, 0.25053),
            (42, 742, 0.42853),
            (316, 854, 0.22919),
        ] {
            let mi = mutual_information(&table(ben, mal));
            assert!((mi - expected).abs() <= 5e-4, "({ben},{mal}) → {mi}");
        }
    }

    #[test]
    fn zero_benign_rows_deviate_within_widened_tolerance() {
        // reference 0.08615 and 0.04725; plain MI gives ≈0.0901 and ≈0.0508
        let cs = mutual_information(&table(0, 169));
        let pm = mutual_information(&table(0, 98));
        assert!((cs - 0.08615).abs() <= 5e-3 && (cs - 0.08615).abs() > 5e-4);
        assert!((pm - 0.04725).abs() <= 5e-3 && (pm - 0.04725).abs() > 5e-4);
    }

    #[test]
    fn identical_rates_score_zero() {
        assert_eq!(mutual_information(&table(100, 100)), 0.0);
        assert_eq!(mutual_information(&ContingencyTable::new("f", 10, 20, 50, 100)), 0.0);
    }

    #[test]
    fn oracle_agreement_on_random_tables() {
        let mut rng = SplitMix64::new(2014);
        for _ in 0..1000 {
            let n_ben = 1 + rng.next_u64() % 2000;
            let n_sus = 1 + rng.next_u64() % 2000;
            let t = ContingencyTable::new(
                "f",
                rng.next_u64() % (n_ben + 1),
                rng.next_u64() % (n_sus + 1),
                n_ben,
                n_sus,
            );
            let mi = mutual_information(&t);
            assert!((mi - entropy_oracle(&t)).abs() <= 1e-12, "{t:?}");
            assert!((mi - info_gain_oracle(&t)).abs() <= 1e-12, "{t:?}");
        }
    }

    #[test]
    fn contingency_counts() {
        let row = |id: &str, label, bit| FeatureVector {
            sample_id: id.into(),
            label: Some(label),
            bits: vec![bit, false],
        };
        let m = VectorMatrix {
            features: vec!["f".into(), "zero".into()],
            rows: vec![
                row("a", ClassLabel::Benign, true),
                row("b", ClassLabel::Benign, false),
                row("c", ClassLabel::Suspicious, true),
                row("d", ClassLabel::Suspicious, true),
            ],
        };
        let t = build_contingency(&m).unwrap();
        assert_eq!((t[0].ben_pos, t[0].count(false, ClassLabel::Benign)), (1, 1));
        assert_eq!((t[0].sus_pos, t[0].count(false, ClassLabel::Suspicious)), (2, 0));
        assert_eq!((t[1].ben_pos, t[1].sus_pos), (0, 0));

        let mut unlabeled = m.clone();
        unlabeled.rows[0].label = None;
        assert!(matches!(build_contingency(&unlabeled), Err(Error::Unlabeled(_))));
        let only_benign = m.subset(&[0, 1]);
        assert!(matches!(
            build_contingency(&only_benign),
            Err(Error::EmptyClass("suspicious"))
        ));
    }

    #[test]
    fn ranking_order_and_ties() {
        let tables = vec![
            ContingencyTable::new("b", 10, 90, 100, 100),
            ContingencyTable::new("a", 10, 90, 100, 100),
            ContingencyTable::new("c", 40, 60, 100, 100),
            ContingencyTable::new("z", 0, 0, 100, 100),
        ];
        let ranked = rank_features(&tables);
        let names: Vec<_> = ranked.iter().map(|r| r.feature.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "z"]);
        assert_eq!(ranked[3].score, 0.0);
        assert_eq!(ranked.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3, 4]);

        let single = rank_features(&tables[2..3]);
        assert_eq!(single[0].rank, 1);
    }

    fn ranked_n(n: usize) -> Vec<RankedFeature> {
        (0..n)
            .map(|i| RankedFeature {
                rank: i + 1,
                feature: format!("f{:02}", i + 1),
                score: 1.0 / (i + 1) as f64,
                benign_count: 0,
                malware_count: 0,
            })
            .collect()
    }

    #[test]
    fn presets() {
        let ranked = ranked_n(20);
        let low = select_top(&ranked, Preset::FiveLow).unwrap();
        assert_eq!(low.features, ["f16", "f17", "f18", "f19", "f20"]);
        assert_eq!(select_top(&ranked, Preset::Fifteen).unwrap().features.len(), 15);
        assert_eq!(select_top(&ranked, Preset::Top(1)).unwrap().features, ["f01"]);
        assert_eq!(select_top(&ranked, Preset::FiveTop).unwrap().features[4], "f05");
        let err = select_top(&ranked_n(19), Preset::FiveLow).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientFeatures {
                required: 20,
                available: 19
            }
        ));
    }

    #[test]
    fn preset_names_round_trip() {
        for p in [
            Preset::FiveTop,
            Preset::FiveLow,
            Preset::Ten,
            Preset::Fifteen,
            Preset::Twenty,
            Preset::Top(7),
        ] {
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
        assert!("7f".parse::<Preset>().is_err());
        assert!("top-0".parse::<Preset>().is_err());
    }

    #[test]
    fn csv_layout() {
        let ranked = rank_features(&[table(20, 591)]);
        assert_eq!(
            ranking_csv(&ranked),
            "rank,feature,benign_count,malware_count,total,infogain\n1,f,20,591,611,0.32920\n"
        );
    }

    fn arb_table() -> impl Strategy<Value = ContingencyTable> {
        (1u64..500, 1u64..500).prop_flat_map(|(n_ben, n_sus)| {
            (0..=n_ben, 0..=n_sus).prop_map(move |(b, s)| ContingencyTable::new("f", b, s, n_ben, n_sus))
        })
    }

    proptest! {
        #[test]
        fn symmetric_under_class_swap(t in arb_table()) {
            prop_assert!((mutual_information(&t) - mutual_information(&t.swapped())).abs() <= 1e-12);
        }

        #[test]
        fn zero_iff_equal_rates(t in arb_table()) {
            let equal = t.sus_pos * t.n_ben == t.ben_pos * t.n_sus;
            let mi = mutual_information(&t);
            prop_assert!(mi >= 0.0);
            prop_assert_eq!(mi == 0.0, equal);
        }

        #[test]
        fn invariant_under_duplication(t in arb_table()) {
            let doubled = ContingencyTable::new("f", t.ben_pos * 2, t.sus_pos * 2, t.n_ben * 2, t.n_sus * 2);
            prop_assert!((mutual_information(&t) - mutual_information(&doubled)).abs() <= 1e-12);
        }

        #[test]
        fn bounded_by_class_entropy(t in arb_table()) {
            let n = t.total() as f64;
            let p = t.n_ben as f64 / n;
            let h_c = -(p * p.log2()) - ((1.0 - p) * (1.0 - p).log2());
            prop_assert!(mutual_information(&t) <= h_c + 1e-12);
        }

        #[test]
        fn appended_zero_feature_ranks_last(counts in prop::collection::vec((0u64..=50, 51u64..=100), 1..10)) {
            let tables: Vec<_> = counts.iter().enumerate()
                .map(|(i, &(b, s))| ContingencyTable::new(format!("f{i}"), b, s, 100, 100))
                .collect();
            let before = rank_features(&tables);
            let mut extended = tables.clone();
            extended.insert(0, ContingencyTable::new("zzz-zero", 0, 0, 100, 100));
            let after = rank_features(&extended);
            prop_assert_eq!(&after[..before.len()], &before[..]);
            prop_assert_eq!(after.last().unwrap().feature.as_str(), "zzz-zero");
            prop_assert_eq!(after.last().unwrap().score, 0.0);
        }
    }
}
