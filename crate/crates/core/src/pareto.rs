//! Bi-objective feature ranking: non-dominated sorting (maximization),
//! per-front crowding distance, and the score `S = P + 1/(1 + d)` where a
//! lower score is a better feature.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::server::ObjectivePair;

/// `u` dominates `v` when it is no worse in both objectives and strictly
/// better in at least one (both objectives are maximized).
pub fn dominates(u: &ObjectivePair, v: &ObjectivePair) -> bool {
    u.o1 >= v.o1 && u.o2 >= v.o2 && (u.o1 > v.o1 || u.o2 > v.o2)
}

/// Pareto front number (1-based) of every point.
///
/// Fast non-dominated sort with domination counts; `O(n^2)` comparisons.
/// Equal points never dominate each other and therefore share a front.
pub fn non_dominated_sort(points: &[ObjectivePair]) -> Result<Vec<u32>> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points to sort".into()));
    }
    if let Some(bad) = points.iter().position(|p| !p.o1.is_finite() || !p.o2.is_finite()) {
        return Err(Error::NonFiniteObjective(bad));
    }
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }

    let mut fronts = vec![0u32; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut rank = 1u32;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            fronts[i] = rank;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        rank += 1;
    }
    Ok(fronts)
}

/// Crowding distance of each point of a single front, in input order.
///
/// For each objective the points are sorted (ties by input position); the two
/// extremes get `+inf` and interior points add the normalized gap between
/// their neighbours. An objective with zero range adds nothing.
pub fn crowding_distance(front: &[ObjectivePair]) -> Result<Vec<f64>> {
    if front.is_empty() {
        return Err(Error::InvalidArgument("crowding distance of an empty front".into()));
    }
    let n = front.len();
    let mut distance = vec![0.0f64; n];
    let objectives: [fn(&ObjectivePair) -> f64; 2] = [|p| p.o1, |p| p.o2];
    for value in objectives {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| value(&front[a]).total_cmp(&value(&front[b])).then(a.cmp(&b)));
        distance[idx[0]] = f64::INFINITY;
        distance[idx[n - 1]] = f64::INFINITY;
        let lo = value(&front[idx[0]]);
        let hi = value(&front[idx[n - 1]]);
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in idx.windows(3) {
            let gap = value(&front[w[2]]) - value(&front[w[0]]);
            distance[w[1]] += gap / range;
        }
    }
    Ok(distance)
}

/// `P + 1/(1 + d)`, with `d = +inf` giving exactly `P`.
pub fn score(front: u32, crowding: f64) -> f64 {
    if crowding.is_infinite() {
        f64::from(front)
    } else {
        f64::from(front) + 1.0 / (1.0 + crowding)
    }
}

/// One feature's position in the ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub feature: u32,
    pub front: u32,
    #[serde(serialize_with = "ser_crowding", deserialize_with = "de_crowding")]
    pub crowding: f64,
    pub score: f64,
}

/// Per-feature front, crowding and score, plus the ascending-score order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RankingWire")]
pub struct FeatureRanking {
    order: Vec<u32>,
    records: Vec<RankRecord>,
}

#[derive(Deserialize)]
struct RankingWire {
    order: Vec<u32>,
    records: Vec<RankRecord>,
}

impl TryFrom<RankingWire> for FeatureRanking {
    type Error = Error;

    fn try_from(w: RankingWire) -> Result<Self> {
        let ranking = FeatureRanking {
            order: w.order,
            records: w.records,
        };
        ranking.validate()?;
        Ok(ranking)
    }
}

impl FeatureRanking {
    /// Features in ascending score order (best first).
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    /// Records indexed by feature.
    pub fn records(&self) -> &[RankRecord] {
        &self.records
    }

    pub fn num_features(&self) -> usize {
        self.records.len()
    }

    /// The best `k` features, best first.
    pub fn top(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.order.len() {
            return Err(Error::InvalidArgument(format!(
                "top_k must lie in [1, {}], got {k}",
                self.order.len()
            )));
        }
        Ok(self.order[..k].iter().map(|&f| f as usize).collect())
    }

    fn validate(&self) -> Result<()> {
        let d = self.records.len();
        if d == 0 || self.order.len() != d {
            return Err(Error::InvalidArgument("ranking size mismatch".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.feature as usize != i {
                return Err(Error::InvalidArgument(format!("record {i} names feature {}", r.feature)));
            }
            if r.front == 0 || r.front as usize > d {
                return Err(Error::InvalidArgument(format!("front {} out of range", r.front)));
            }
            if r.crowding.is_nan() || r.crowding < 0.0 {
                return Err(Error::InvalidArgument(format!("invalid crowding {}", r.crowding)));
            }
            if (score(r.front, r.crowding) - r.score).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("inconsistent score for feature {i}")));
            }
        }
        let mut seen = vec![false; d];
        for &f in &self.order {
            match seen.get_mut(f as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(Error::InvalidArgument("order is not a permutation".into())),
            }
        }
        if self
            .order
            .windows(2)
            .any(|w| self.records[w[0] as usize].score > self.records[w[1] as usize].score)
        {
            return Err(Error::InvalidArgument("order is not sorted by score".into()));
        }
        Ok(())
    }
}

/// Builds the ranking from per-feature fronts and crowding distances; ties in
/// score are broken by ascending feature index.
///
/// A front-k feature with zero crowding and a front-(k+1) feature with
/// infinite crowding both score k+1; that tie goes to the lower front first
/// so fronts never decrease along the order.
pub fn score_and_rank(fronts: &[u32], distances: &[f64]) -> Result<FeatureRanking> {
    if fronts.len() != distances.len() {
        return Err(Error::LengthMismatch {
            left: fronts.len(),
            right: distances.len(),
        });
    }
    if fronts.is_empty() {
        return Err(Error::InvalidArgument("nothing to rank".into()));
    }
    let records: Vec<RankRecord> = fronts
        .iter()
        .zip(distances)
        .enumerate()
        .map(|(i, (&front, &crowding))| RankRecord {
            feature: i as u32,
            front,
            crowding,
            score: score(front, crowding),
        })
        .collect();
    let mut order: Vec<u32> = (0..records.len() as u32).collect();
    order.sort_by(|&a, &b| {
        records[a as usize]
            .score
            .total_cmp(&records[b as usize].score)
            .then(records[a as usize].front.cmp(&records[b as usize].front))
            .then(a.cmp(&b))
    });
    let ranking = FeatureRanking { order, records };
    ranking.validate()?;
    Ok(ranking)
}

/// Full server-side sort: fronts, crowding within each front, scores.
///
/// `points[i]` must describe feature `i`.
pub fn rank_features(points: &[ObjectivePair]) -> Result<FeatureRanking> {
    if let Some((i, p)) = points.iter().enumerate().find(|(i, p)| p.feature_index != *i) {
        return Err(Error::InvalidArgument(format!(
            "objective {i} belongs to feature {}",
            p.feature_index
        )));
    }
    let fronts = non_dominated_sort(points)?;
    let max_front = fronts.iter().copied().max().unwrap_or(0);
    let mut distances = vec![0.0; points.len()];
    for f in 1..=max_front {
        let members: Vec<usize> = (0..points.len()).filter(|&i| fronts[i] == f).collect();
        let front_points: Vec<ObjectivePair> = members.iter().map(|&i| points[i]).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&front_points)?) {
            distances[i] = d;
        }
    }
    score_and_rank(&fronts, &distances)
}

fn ser_crowding<S: Serializer>(d: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if d.is_infinite() && *d > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*d)
    }
}

fn de_crowding<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Crowding {
        Finite(f64),
        Tag(String),
    }
    match Crowding::deserialize(d)? {
        Crowding::Finite(v) => Ok(v),
        Crowding::Tag(t) if t == "inf" => Ok(f64::INFINITY),
        Crowding::Tag(t) => Err(serde::de::Error::custom(format!("bad crowding value {t:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectivePair> {
        v.iter()
            .enumerate()
            .map(|(i, &(o1, o2))| ObjectivePair { feature_index: i, o1, o2 })
            .collect()
    }

    /// Repeatedly peels the set of points no remaining point dominates.
    fn peeling_oracle(points: &[ObjectivePair]) -> Vec<u32> {
        let mut fronts = vec![0u32; points.len()];
        let mut remaining: Vec<usize> = (0..points.len()).collect();
        let mut rank = 1;
        while !remaining.is_empty() {
            let layer: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
                .collect();
            for &i in &layer {
                fronts[i] = rank;
            }
            remaining.retain(|i| !layer.contains(i));
            rank += 1;
        }
        fronts
    }

    #[test]
    fn mutually_non_dominated() {
        assert_eq!(non_dominated_sort(&pts(&[(1.0, 0.0), (0.0, 1.0), (0.5, 0.5)])).unwrap(), vec![1, 1, 1]);
    }

    #[test]
    fn dominated_point_goes_to_second_front() {
        assert_eq!(non_dominated_sort(&pts(&[(2.0, 2.0), (1.0, 1.0)])).unwrap(), vec![1, 2]);
    }

    #[test]
    fn duplicates_share_a_front() {
        assert_eq!(
            non_dominated_sort(&pts(&[(1.0, 1.0), (1.0, 1.0), (0.0, 0.0)])).unwrap(),
            vec![1, 1, 2]
        );
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            non_dominated_sort(&pts(&[(f64::NAN, 1.0)])),
            Err(Error::NonFiniteObjective(0))
        ));
        assert!(non_dominated_sort(&[]).is_err());
    }

    #[test]
    fn crowding_hand_cases() {
        assert_eq!(crowding_distance(&pts(&[(0.3, 0.4)])).unwrap(), vec![f64::INFINITY]);
        assert_eq!(
            crowding_distance(&pts(&[(0.0, 1.0), (1.0, 0.0)])).unwrap(),
            vec![f64::INFINITY; 2]
        );
        let d = crowding_distance(&pts(&[(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)])).unwrap();
        assert_eq!(d, vec![f64::INFINITY, 2.0, f64::INFINITY]);
        assert!(crowding_distance(&[]).is_err());
    }

    #[test]
    fn crowding_zero_range_objective() {
        let d = crowding_distance(&pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)])).unwrap();
        assert_eq!(d, vec![f64::INFINITY, 0.0, f64::INFINITY]);
    }

    #[test]
    fn score_values() {
        assert_eq!(score(1, f64::INFINITY), 1.0);
        assert_eq!(score(1, 0.0), 2.0);
        assert_eq!(score(2, 1.0), 2.5);
    }

    #[test]
    fn ties_break_by_feature_index() {
        let r = score_and_rank(&[1, 1, 1], &[f64::INFINITY, 0.0, f64::INFINITY]).unwrap();
        assert_eq!(r.order(), &[0, 2, 1]);
        assert!(score_and_rank(&[1], &[]).is_err());
    }

    #[test]
    fn json_layout() {
        let r = score_and_rank(&[1, 2], &[f64::INFINITY, 1.0]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"order":[0,1],"records":[{"feature":0,"front":1,"crowding":"inf","score":1.0},{"feature":1,"front":2,"crowding":1.0,"score":2.5}]}"#
        );
        let back: FeatureRanking = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let broken = json.replace(r#""order":[0,1]"#, r#""order":[1,0]"#);
        assert!(serde_json::from_str::<FeatureRanking>(&broken).is_err());
    }

    fn point_set() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..120)
    }

    /// Coarse grid values so that ties and duplicates actually occur.
    fn gridded_set() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((0u8..6, 0u8..6), 1..80)
            .prop_map(|v| v.into_iter().map(|(a, b)| (f64::from(a), f64::from(b))).collect())
    }

    proptest! {
        #[test]
        fn sort_matches_peeling(v in point_set()) {
            let p = pts(&v);
            prop_assert_eq!(non_dominated_sort(&p).unwrap(), peeling_oracle(&p));
        }

        #[test]
        fn sort_matches_peeling_with_ties(v in gridded_set()) {
            let p = pts(&v);
            prop_assert_eq!(non_dominated_sort(&p).unwrap(), peeling_oracle(&p));
        }

        #[test]
        fn ranking_invariants(v in gridded_set()) {
            let r = rank_features(&pts(&v)).unwrap();
            let recs = r.records();
            // fronts along the order never decrease
            for w in r.order().windows(2) {
                prop_assert!(recs[w[0] as usize].front <= recs[w[1] as usize].front);
            }
            for rec in recs {
                let p = f64::from(rec.front);
                prop_assert!(rec.score >= p && rec.score <= p + 1.0);
            }
            for a in recs {
                for b in recs {
                    if b.front == a.front + 1 {
                        prop_assert!(a.score < b.score + 1.0);
                    }
                    if b.front >= a.front + 2 {
                        prop_assert!(a.score < b.score);
                    }
                }
            }
        }

        #[test]
        fn dominance_implies_better_score(v in point_set()) {
            // continuous draws: no duplicate points, so interior crowding is > 0
            let p = pts(&v);
            let r = rank_features(&p).unwrap();
            for u in &p {
                for w in &p {
                    if dominates(u, w) {
                        prop_assert!(r.records()[u.feature_index].score < r.records()[w.feature_index].score);
                    }
                }
            }
        }

        #[test]
        fn dominance_implies_earlier_position(v in gridded_set()) {
            // with duplicates a zero-crowding point can tie the next front's
            // extreme in score, so only the order and a weak bound hold
            let p = pts(&v);
            let r = rank_features(&p).unwrap();
            let mut pos = vec![0; p.len()];
            for (i, &f) in r.order().iter().enumerate() {
                pos[f as usize] = i;
            }
            for u in &p {
                for w in &p {
                    if dominates(u, w) {
                        prop_assert!(pos[u.feature_index] < pos[w.feature_index]);
                        prop_assert!(r.records()[u.feature_index].score <= r.records()[w.feature_index].score);
                    }
                }
            }
        }

        #[test]
        fn scaling_an_objective(v in point_set(), c in 0.01f64..100.0) {
            let p = pts(&v);
            let scaled: Vec<ObjectivePair> = p.iter().map(|q| ObjectivePair { o1: q.o1 * c, ..*q }).collect();
            prop_assert_eq!(non_dominated_sort(&p).unwrap(), non_dominated_sort(&scaled).unwrap());
            let a = crowding_distance(&p).unwrap();
            let b = crowding_distance(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x == y || (x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }
}
