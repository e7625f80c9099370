//! Game data model: weighted voting games `[q; w1,...,wn]`, k-vector games
//! combined by intersection or union, coalitions as bit vectors, parsing and
//! validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("quota {quota} out of range: must satisfy 0 < quota <= total weight {total}")]
    QuotaOutOfRange { quota: i64, total: u64 },
    #[error("player set is empty")]
    EmptyPlayerSet,
    #[error("negative weight {weight} for player {player}")]
    NegativeWeight { player: usize, weight: i64 },
    #[error("total weight {total} exceeds cap {cap}")]
    WeightCapExceeded { total: u64, cap: u64 },
    #[error("vector game has no component rules")]
    EmptyRuleSet,
    #[error("rule {rule} has {got} players, expected {expected}")]
    PlayerCountMismatch { rule: usize, got: usize, expected: usize },
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("validation error: {0}")]
    Validation(#[from] GameError),
}

/// A weighted voting game `[q; w1,...,wn]`: coalition `S` wins iff
/// `sum_{i in S} w_i >= q`. Players are 1-based in all user-facing output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedVotingGame {
    quota: u64,
    weights: Vec<u64>,
}

impl WeightedVotingGame {
    pub fn new(quota: i64, weights: Vec<i64>) -> Result<Self, GameError> {
        if weights.is_empty() {
            return Err(GameError::EmptyPlayerSet);
        }
        for (idx, &w) in weights.iter().enumerate() {
            if w < 0 {
                return Err(GameError::NegativeWeight { player: idx + 1, weight: w });
            }
        }
        let weights: Vec<u64> = weights.into_iter().map(|w| w as u64).collect();
        let total: u64 = weights.iter().sum();
        if quota <= 0 || quota as u64 > total {
            return Err(GameError::QuotaOutOfRange { quota, total });
        }
        Ok(Self { quota: quota as u64, weights })
    }

    pub fn quota(&self) -> u64 {
        self.quota
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// `W+`, the total voting weight.
    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub fn is_winning(&self, coalition: &Coalition) -> bool {
        debug_assert_eq!(coalition.n(), self.n());
        let mut sum = 0u64;
        for i in coalition.iter() {
            sum += self.weights[i];
        }
        sum >= self.quota
    }

    /// Weight-proportional pre-imputation `w / W+`.
    pub fn proportional_payoff<S: Scalar>(&self) -> Vec<S> {
        let total = S::from_int(self.total_weight() as i64);
        self.weights
            .iter()
            .map(|&w| S::from_int(w as i64) / total.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Intersection,
    Union,
}

/// `k` weighted voting games on one player set, combined by intersection
/// (every rule must pass) or union (some rule must pass).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorVotingGame {
    rules: Vec<WeightedVotingGame>,
    combine: Combine,
}

impl VectorVotingGame {
    pub fn new(rules: Vec<WeightedVotingGame>, combine: Combine) -> Result<Self, GameError> {
        if rules.is_empty() {
            return Err(GameError::EmptyRuleSet);
        }
        let expected = rules[0].n();
        for (k, rule) in rules.iter().enumerate().skip(1) {
            if rule.n() != expected {
                return Err(GameError::PlayerCountMismatch {
                    rule: k + 1,
                    got: rule.n(),
                    expected,
                });
            }
        }
        Ok(Self { rules, combine })
    }

    pub fn rules(&self) -> &[WeightedVotingGame] {
        &self.rules
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn k(&self) -> usize {
        self.rules.len()
    }

    pub fn n(&self) -> usize {
        self.rules[0].n()
    }

    pub fn evaluate(&self, coalition: &Coalition) -> bool {
        match self.combine {
            Combine::Intersection => self.rules.iter().all(|g| g.is_winning(coalition)),
            Combine::Union => self.rules.iter().any(|g| g.is_winning(coalition)),
        }
    }
}

/// Any simple game we can evaluate coalition-by-coalition.
pub trait SimpleGame {
    fn n(&self) -> usize;
    fn wins(&self, coalition: &Coalition) -> bool;
}

impl SimpleGame for WeightedVotingGame {
    fn n(&self) -> usize {
        self.n()
    }

    fn wins(&self, coalition: &Coalition) -> bool {
        self.is_winning(coalition)
    }
}

impl SimpleGame for VectorVotingGame {
    fn n(&self) -> usize {
        self.n()
    }

    fn wins(&self, coalition: &Coalition) -> bool {
        self.evaluate(coalition)
    }
}

/// A subset of the players, stored as a fixed-width bit vector. Player
/// indices are 0-based in this API; `Display` renders them 1-based.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Coalition {
    n: usize,
    words: Vec<u64>,
}

impl Coalition {
    pub fn empty(n: usize) -> Self {
        Self { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for i in 0..n {
            c.insert(i);
        }
        c
    }

    /// Lowest `n` bits of `mask` select members; handy for exhaustive scans.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64);
        let mut c = Self::empty(n);
        if !c.words.is_empty() {
            c.words[0] = mask & if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        }
        c
    }

    pub fn from_members(n: usize, members: &[usize]) -> Self {
        let mut c = Self::empty(n);
        for &i in members {
            c.insert(i);
        }
        c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, player: usize) {
        assert!(player < self.n);
        self.words[player / 64] |= 1 << (player % 64);
    }

    pub fn remove(&mut self, player: usize) {
        assert!(player < self.n);
        self.words[player / 64] &= !(1 << (player % 64));
    }

    pub fn contains(&self, player: usize) -> bool {
        player < self.n && self.words[player / 64] >> (player % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&i| self.contains(i))
    }

    /// 1-based member list, ascending.
    pub fn members_1based(&self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }
}

impl std::fmt::Display for Coalition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (k, p) in self.members_1based().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "}}")
    }
}

/// `sum_{i in S} x_i`.
pub fn coalition_payoff<S: Scalar>(x: &[S], coalition: &Coalition) -> S {
    debug_assert_eq!(x.len(), coalition.n());
    coalition
        .iter()
        .fold(S::zero(), |acc, i| acc + x[i].clone())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedGame {
    Scalar(WeightedVotingGame),
    Vector(VectorVotingGame),
}

impl ParsedGame {
    pub fn n(&self) -> usize {
        match self {
            ParsedGame::Scalar(g) => g.n(),
            ParsedGame::Vector(g) => g.n(),
        }
    }
}

/// Default cap on `W+` accepted at parse time; LP size is Theta(n * W+).
pub const DEFAULT_WEIGHT_CAP: u64 = 1_000_000;

#[derive(Deserialize)]
struct ScalarGameJson {
    quota: i64,
    weights: Vec<i64>,
}

#[derive(Deserialize)]
struct VectorGameJson {
    rules: Vec<ScalarGameJson>,
    combine: Combine,
}

/// Parse either format: the one-line text form `q; w1 w2 ... wn` or the JSON
/// object forms (scalar `{"quota":..,"weights":[..]}`, vector
/// `{"rules":[..],"combine":"intersection"|"union"}`).
pub fn parse_game(text: &str) -> Result<ParsedGame, ParseError> {
    parse_game_with_cap(text, DEFAULT_WEIGHT_CAP)
}

pub fn parse_game_with_cap(text: &str, weight_cap: u64) -> Result<ParsedGame, ParseError> {
    let trimmed = text.trim();
    let parsed = if trimmed.starts_with('{') {
        parse_json(trimmed)?
    } else {
        ParsedGame::Scalar(parse_text(trimmed)?)
    };
    let total_cap_violation = match &parsed {
        ParsedGame::Scalar(g) => (g.total_weight() > weight_cap).then(|| g.total_weight()),
        ParsedGame::Vector(g) => g
            .rules()
            .iter()
            .map(|r| r.total_weight())
            .find(|&t| t > weight_cap),
    };
    if let Some(total) = total_cap_violation {
        return Err(ParseError::Validation(GameError::WeightCapExceeded {
            total,
            cap: weight_cap,
        }));
    }
    Ok(parsed)
}

fn parse_text(text: &str) -> Result<WeightedVotingGame, ParseError> {
    let (quota_part, weights_part) = text
        .split_once(';')
        .ok_or_else(|| ParseError::Syntax("expected `q; w1 w2 ... wn`".into()))?;
    let quota: i64 = quota_part
        .trim()
        .parse()
        .map_err(|e| ParseError::Syntax(format!("bad quota `{}`: {e}", quota_part.trim())))?;
    let weights: Vec<i64> = weights_part
        .split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|e| ParseError::Syntax(format!("bad weight `{tok}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(WeightedVotingGame::new(quota, weights)?)
}

fn parse_json(text: &str) -> Result<ParsedGame, ParseError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    if value.get("rules").is_some() {
        let vg: VectorGameJson =
            serde_json::from_value(value).map_err(|e| ParseError::Syntax(e.to_string()))?;
        let rules = vg
            .rules
            .into_iter()
            .map(|r| WeightedVotingGame::new(r.quota, r.weights))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ParsedGame::Vector(VectorVotingGame::new(rules, vg.combine)?))
    } else {
        let g: ScalarGameJson =
            serde_json::from_value(value).map_err(|e| ParseError::Syntax(e.to_string()))?;
        Ok(ParsedGame::Scalar(WeightedVotingGame::new(g.quota, g.weights)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> WeightedVotingGame {
        WeightedVotingGame::new(5, vec![2, 4, 2, 1]).unwrap()
    }

    #[test]
    fn validate_accepts_fig1() {
        assert_eq!(fig1().total_weight(), 9);
    }

    #[test]
    fn validate_rejects_large_quota() {
        assert_eq!(
            WeightedVotingGame::new(10, vec![2, 4, 2, 1]).unwrap_err(),
            GameError::QuotaOutOfRange { quota: 10, total: 9 }
        );
    }

    #[test]
    fn validate_rejects_nonpositive_quota() {
        assert!(matches!(
            WeightedVotingGame::new(0, vec![1, 1]).unwrap_err(),
            GameError::QuotaOutOfRange { .. }
        ));
    }

    #[test]
    fn validate_rejects_empty_and_negative() {
        assert_eq!(WeightedVotingGame::new(1, vec![]).unwrap_err(), GameError::EmptyPlayerSet);
        assert_eq!(
            WeightedVotingGame::new(5, vec![2, 4, -1]).unwrap_err(),
            GameError::NegativeWeight { player: 3, weight: -1 }
        );
    }

    #[test]
    fn zero_weights_allowed() {
        let g = WeightedVotingGame::new(1, vec![1, 0]).unwrap();
        assert!(g.is_winning(&Coalition::from_members(2, &[0])));
        assert!(!g.is_winning(&Coalition::from_members(2, &[1])));
    }

    #[test]
    fn is_winning_examples() {
        let g = fig1();
        // players 2 and 4 (1-based): weights 4 + 1 = 5 >= 5
        assert!(g.is_winning(&Coalition::from_members(4, &[1, 3])));
        assert!(!g.is_winning(&Coalition::empty(4)));
        assert!(g.is_winning(&Coalition::full(4)));
    }

    #[test]
    fn vector_evaluate_examples() {
        let vg = VectorVotingGame::new(
            vec![
                WeightedVotingGame::new(2, vec![1, 1, 0]).unwrap(),
                WeightedVotingGame::new(1, vec![0, 0, 1]).unwrap(),
            ],
            Combine::Intersection,
        )
        .unwrap();
        // S = {1,3}: rule 1 gets weight 1 < 2, so the intersection loses.
        assert!(!vg.evaluate(&Coalition::from_members(3, &[0, 2])));
        assert!(vg.evaluate(&Coalition::full(3)));

        let vu = VectorVotingGame::new(vg.rules().to_vec(), Combine::Union).unwrap();
        assert!(vu.evaluate(&Coalition::from_members(3, &[2])));
        assert!(vu.evaluate(&Coalition::full(3)));
    }

    #[test]
    fn vector_k1_agrees_with_scalar() {
        let g = fig1();
        for combine in [Combine::Intersection, Combine::Union] {
            let vg = VectorVotingGame::new(vec![g.clone()], combine).unwrap();
            for mask in 0..16u64 {
                let s = Coalition::from_mask(4, mask);
                assert_eq!(vg.evaluate(&s), g.is_winning(&s));
            }
        }
    }

    #[test]
    fn coalition_payoff_examples() {
        let x = [0.2, 0.4, 0.2, 0.2];
        assert_eq!(coalition_payoff(&x, &Coalition::from_members(4, &[1, 3])), 0.6000000000000001);
        assert_eq!(coalition_payoff(&x, &Coalition::empty(4)), 0.0);
        let even = [0.25; 4];
        assert_eq!(coalition_payoff(&even, &Coalition::full(4)), 1.0);
    }

    #[test]
    fn parse_text_format() {
        let ParsedGame::Scalar(g) = parse_game("5; 2 4 2 1").unwrap() else {
            panic!("expected scalar game");
        };
        assert_eq!(g, fig1());
    }

    #[test]
    fn parse_json_formats() {
        let scalar = parse_game(r#"{"quota": 5, "weights": [2, 4, 2, 1]}"#).unwrap();
        assert_eq!(scalar, ParsedGame::Scalar(fig1()));

        let vector = parse_game(
            r#"{"rules":[{"quota":2,"weights":[1,1,0]},{"quota":1,"weights":[0,0,1]}],"combine":"intersection"}"#,
        )
        .unwrap();
        let ParsedGame::Vector(vg) = vector else { panic!("expected vector game") };
        assert_eq!(vg.k(), 2);
        assert_eq!(vg.combine(), Combine::Intersection);
    }

    #[test]
    fn parse_rejects_negative_weight() {
        assert!(matches!(
            parse_game("5; 2 4 -1").unwrap_err(),
            ParseError::Validation(GameError::NegativeWeight { player: 3, .. })
        ));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(matches!(parse_game("hello world").unwrap_err(), ParseError::Syntax(_)));
        assert!(matches!(parse_game("5; 2 four 1").unwrap_err(), ParseError::Syntax(_)));
    }

    #[test]
    fn parse_enforces_weight_cap() {
        assert!(matches!(
            parse_game_with_cap("5; 4 4", 7).unwrap_err(),
            ParseError::Validation(GameError::WeightCapExceeded { total: 8, cap: 7 })
        ));
    }

    #[test]
    fn winning_monotone_under_superset() {
        let g = fig1();
        for mask in 0..16u64 {
            let s = Coalition::from_mask(4, mask);
            if g.is_winning(&s) {
                for extra in 0..4 {
                    let mut t = s.clone();
                    t.insert(extra);
                    assert!(g.is_winning(&t));
                }
            }
        }
    }

    #[test]
    fn scaling_preserves_winners() {
        let g = WeightedVotingGame::new(5, vec![2, 4, 2, 1]).unwrap();
        let scaled = WeightedVotingGame::new(15, vec![6, 12, 6, 3]).unwrap();
        for mask in 0..16u64 {
            let s = Coalition::from_mask(4, mask);
            assert_eq!(g.is_winning(&s), scaled.is_winning(&s));
        }
    }

    #[test]
    fn coalition_display_is_one_based() {
        let c = Coalition::from_members(4, &[1, 3]);
        assert_eq!(c.to_string(), "{2,4}");
    }
}
