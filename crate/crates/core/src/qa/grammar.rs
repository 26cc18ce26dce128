//! Answer grammars for planning, detection and lane tasks.
//!
//! ```text
//! planning   := field+            (one field per chain element, in chain order)
//! field      := "VEL" pair | "ACC" pair | "YAW" "[" bin "]"
//!             | "HIST" pair{3} | "WP" pair{6}
//! detection  := ("CAT" name pair)*
//! lane       := ("LANE" pair{4})*
//! pair       := "[" bin "," bin "]"
//! bin        := 0 | [1-9][0-9]{0,2}      (0 ≤ bin ≤ 999)
//! ```
//!
//! Whitespace between tokens is free-form; the encoders emit single spaces.
//! Parsers are total: any input yields a value or a [`ParseError`] carrying the
//! byte offset where parsing stopped.

use crate::bev::{decode_point, BevPoint, BinIndex, BinSpec};
use crate::scene::{Category, HISTORY_LEN, PLAN_LEN};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub type BinPair = (BinIndex, BinIndex);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainElement {
    /// Velocity.
    V,
    /// Acceleration.
    A,
    /// Yaw angle.
    Y,
    /// Historical trajectory.
    T,
    /// Planning waypoints.
    P,
}

impl ChainElement {
    pub fn marker(self) -> &'static str {
        match self {
            ChainElement::V => "VEL",
            ChainElement::A => "ACC",
            ChainElement::Y => "YAW",
            ChainElement::T => "HIST",
            ChainElement::P => "WP",
        }
    }

    fn letter(self) -> char {
        match self {
            ChainElement::V => 'V',
            ChainElement::A => 'A',
            ChainElement::Y => 'Y',
            ChainElement::T => 'T',
            ChainElement::P => 'P',
        }
    }
}

/// Ordered chain-of-thought fields of a planning answer, e.g. `V-A-P`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainSpec(Vec<ChainElement>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown chain element {0:?}; expected one of V, A, Y, T, P")]
    Unknown(String),
    #[error("chain element {0} appears twice")]
    Duplicate(char),
    #[error("chain must contain P")]
    MissingPlan,
}

impl ChainSpec {
    pub fn new(elements: Vec<ChainElement>) -> Result<Self, ChainError> {
        for (i, e) in elements.iter().enumerate() {
            if elements[..i].contains(e) {
                return Err(ChainError::Duplicate(e.letter()));
            }
        }
        if !elements.contains(&ChainElement::P) {
            return Err(ChainError::MissingPlan);
        }
        Ok(ChainSpec(elements))
    }

    pub fn elements(&self) -> &[ChainElement] {
        &self.0
    }

    pub fn contains(&self, e: ChainElement) -> bool {
        self.0.contains(&e)
    }

    /// `V-A-P`, the default chain.
    pub fn vap() -> Self {
        ChainSpec(vec![ChainElement::V, ChainElement::A, ChainElement::P])
    }

    /// The six chains compared in the chain-of-thought ablation.
    pub fn ablation_set() -> Vec<ChainSpec> {
        ["P", "V-P", "V-A-P", "V-A-Y-P", "V-A-T-P", "P-V-A"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect()
    }
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec::vap()
    }
}

impl fmt::Display for ChainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", e.letter())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for ChainSpec {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let elements = s
            .split('-')
            .map(|part| match part.trim() {
                "V" => Ok(ChainElement::V),
                "A" => Ok(ChainElement::A),
                "Y" => Ok(ChainElement::Y),
                "T" => Ok(ChainElement::T),
                "P" => Ok(ChainElement::P),
                other => Err(ChainError::Unknown(other.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        ChainSpec::new(elements)
    }
}

impl Serialize for ChainSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChainSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Real-valued planning quantities in the ego frame at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningTarget {
    pub velocity: BevPoint,
    pub acceleration: BevPoint,
    pub yaw: f64,
    pub history: [BevPoint; HISTORY_LEN],
    pub waypoints: [BevPoint; PLAN_LEN],
}

/// A binned planning answer. Optional fields are present iff the chain holds them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanningAnswer {
    pub velocity: Option<BinPair>,
    pub acceleration: Option<BinPair>,
    pub yaw: Option<BinIndex>,
    pub history: Option<[BinPair; HISTORY_LEN]>,
    pub waypoints: [BinPair; PLAN_LEN],
}

fn lossy_pair(p: BevPoint, spec: &BinSpec) -> BinPair {
    (spec.encode_lossy(p.x), spec.encode_lossy(p.y))
}

impl PlanningAnswer {
    /// Bin the target, keeping only the fields named in `chain`. Out-of-range
    /// values clamp into the terminal bins.
    pub fn from_target(target: &PlanningTarget, chain: &ChainSpec) -> Self {
        let sp = BinSpec::SPATIAL;
        PlanningAnswer {
            velocity: chain
                .contains(ChainElement::V)
                .then(|| lossy_pair(target.velocity, &BinSpec::VELOCITY)),
            acceleration: chain
                .contains(ChainElement::A)
                .then(|| lossy_pair(target.acceleration, &BinSpec::ACCELERATION)),
            yaw: chain
                .contains(ChainElement::Y)
                .then(|| BinSpec::VELOCITY.encode_lossy(target.yaw)),
            history: chain
                .contains(ChainElement::T)
                .then(|| target.history.map(|p| lossy_pair(p, &sp))),
            waypoints: target.waypoints.map(|p| lossy_pair(p, &sp)),
        }
    }

    pub fn waypoints_m(&self) -> [BevPoint; PLAN_LEN] {
        self.waypoints
            .map(|b| decode_point(b, &BinSpec::SPATIAL).expect("parsed bins are in range"))
    }

    pub fn velocity_mps(&self) -> Option<BevPoint> {
        self.velocity
            .map(|b| decode_point(b, &BinSpec::VELOCITY).expect("parsed bins are in range"))
    }

    pub fn acceleration_mps2(&self) -> Option<BevPoint> {
        self.acceleration
            .map(|b| decode_point(b, &BinSpec::ACCELERATION).expect("parsed bins are in range"))
    }

    pub fn yaw_rad(&self) -> Option<f64> {
        self.yaw
            .map(|b| BinSpec::VELOCITY.decode(b).expect("parsed bins are in range"))
    }

    pub fn history_m(&self) -> Option<[BevPoint; HISTORY_LEN]> {
        self.history.map(|h| {
            h.map(|b| decode_point(b, &BinSpec::SPATIAL).expect("parsed bins are in range"))
        })
    }

    /// Render in chain order. Fields missing from `self` are skipped.
    pub fn to_text(&self, chain: &ChainSpec) -> String {
        let mut parts: Vec<String> = Vec::new();
        for &e in chain.elements() {
            match e {
                ChainElement::V => {
                    if let Some(v) = self.velocity {
                        parts.push(format!("VEL {}", pair_text(v)));
                    }
                }
                ChainElement::A => {
                    if let Some(a) = self.acceleration {
                        parts.push(format!("ACC {}", pair_text(a)));
                    }
                }
                ChainElement::Y => {
                    if let Some(y) = self.yaw {
                        parts.push(format!("YAW [{y}]"));
                    }
                }
                ChainElement::T => {
                    if let Some(h) = self.history {
                        parts.push(format!("HIST {}", pairs_text(&h)));
                    }
                }
                ChainElement::P => parts.push(format!("WP {}", pairs_text(&self.waypoints))),
            }
        }
        parts.join(" ")
    }
}

fn pair_text(p: BinPair) -> String {
    format!("[{},{}]", p.0, p.1)
}

fn pairs_text(ps: &[BinPair]) -> String {
    ps.iter().map(|&p| pair_text(p)).collect::<Vec<_>>().join(" ")
}

pub fn encode_planning_answer(target: &PlanningTarget, chain: &ChainSpec) -> String {
    PlanningAnswer::from_target(target, chain).to_text(chain)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectionAnswer {
    pub objects: Vec<(Category, BinPair)>,
}

impl DetectionAnswer {
    pub fn from_objects(objects: &[(Category, BevPoint)]) -> Self {
        DetectionAnswer {
            objects: objects
                .iter()
                .map(|&(c, p)| (c, lossy_pair(p, &BinSpec::SPATIAL)))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        self.objects
            .iter()
            .map(|&(c, p)| format!("CAT {} {}", c.name(), pair_text(p)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn objects_m(&self) -> Vec<(Category, BevPoint)> {
        self.objects
            .iter()
            .map(|&(c, b)| (c, decode_point(b, &BinSpec::SPATIAL).expect("valid bins")))
            .collect()
    }
}

pub fn encode_detection_answer(objects: &[(Category, BevPoint)]) -> String {
    DetectionAnswer::from_objects(objects).to_text()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaneAnswer {
    pub lanes: Vec<[BinPair; 4]>,
}

impl LaneAnswer {
    pub fn from_lanes(lanes: &[[BevPoint; 4]]) -> Self {
        LaneAnswer {
            lanes: lanes
                .iter()
                .map(|l| l.map(|p| lossy_pair(p, &BinSpec::SPATIAL)))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        self.lanes
            .iter()
            .map(|l| format!("LANE {}", pairs_text(l)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn lanes_m(&self) -> Vec<[BevPoint; 4]> {
        self.lanes
            .iter()
            .map(|l| l.map(|b| decode_point(b, &BinSpec::SPATIAL).expect("valid bins")))
            .collect()
    }
}

pub fn encode_lane_answer(lanes: &[[BevPoint; 4]]) -> String {
    LaneAnswer::from_lanes(lanes).to_text()
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Word(&'a str),
    Int(&'a str),
    LBracket,
    RBracket,
    Comma,
    Other(char),
    End,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "{w:?}"),
            Tok::Int(d) => write!(f, "number {d}"),
            Tok::LBracket => f.write_str("'['"),
            Tok::RBracket => f.write_str("']'"),
            Tok::Comma => f.write_str("','"),
            Tok::Other(c) => write!(f, "{c:?}"),
            Tok::End => f.write_str("end of answer"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(usize, Tok<'a>, usize)>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            pos: 0,
            peeked: None,
        }
    }

    fn scan(&self) -> (usize, Tok<'a>, usize) {
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            return (i, Tok::End, i);
        }
        let start = i;
        let b = bytes[i];
        let run = |pred: fn(u8) -> bool| {
            let mut j = start;
            while j < bytes.len() && pred(bytes[j]) {
                j += 1;
            }
            j
        };
        match b {
            b'[' => (start, Tok::LBracket, start + 1),
            b']' => (start, Tok::RBracket, start + 1),
            b',' => (start, Tok::Comma, start + 1),
            b'0'..=b'9' => {
                let j = run(|c| c.is_ascii_digit());
                (start, Tok::Int(&self.src[start..j]), j)
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let j = run(|c| c.is_ascii_alphanumeric() || c == b'_');
                (start, Tok::Word(&self.src[start..j]), j)
            }
            _ => {
                let c = self.src[start..].chars().next().unwrap();
                (start, Tok::Other(c), start + c.len_utf8())
            }
        }
    }

    fn peek(&mut self) -> (usize, Tok<'a>) {
        if self.peeked.is_none() {
            self.peeked = Some(self.scan());
        }
        let (o, t, _) = self.peeked.unwrap();
        (o, t)
    }

    fn next(&mut self) -> (usize, Tok<'a>) {
        let (o, t, end) = self.peeked.take().unwrap_or_else(|| self.scan());
        self.pos = end;
        (o, t)
    }

    fn fail<T>(&mut self, expected: impl Into<String>) -> Result<T, ParseError> {
        let (offset, tok) = self.peek();
        Err(ParseError {
            offset,
            expected: expected.into(),
            found: tok.to_string(),
        })
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<(), ParseError> {
        if self.peek().1 == want {
            self.next();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn expect_word(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek().1 {
            Tok::Word(w) if w == word => {
                self.next();
                Ok(())
            }
            _ => self.fail(word),
        }
    }

    fn bin(&mut self) -> Result<BinIndex, ParseError> {
        match self.peek().1 {
            Tok::Int(d) => {
                let canonical = d.len() <= 3 && (d.len() == 1 || !d.starts_with('0'));
                if !canonical {
                    return self.fail("bin index 0..=999 without leading zeros");
                }
                self.next();
                Ok(BinIndex(d.parse().expect("at most three digits")))
            }
            _ => self.fail("bin index"),
        }
    }

    fn pair(&mut self) -> Result<BinPair, ParseError> {
        self.expect(Tok::LBracket, "'['")?;
        let a = self.bin()?;
        self.expect(Tok::Comma, "','")?;
        let b = self.bin()?;
        self.expect(Tok::RBracket, "']'")?;
        Ok((a, b))
    }

    fn pairs<const N: usize>(&mut self, what: &str) -> Result<[BinPair; N], ParseError> {
        let mut out = Vec::with_capacity(N);
        while self.peek().1 == Tok::LBracket {
            if out.len() == N {
                return self.fail(format!("{N} {what}"));
            }
            out.push(self.pair()?);
        }
        if out.len() < N {
            return self.fail(format!("{N} {what}"));
        }
        Ok(out.try_into().unwrap())
    }

    fn end(&mut self) -> Result<(), ParseError> {
        self.expect(Tok::End, "end of answer")
    }
}

pub fn parse_planning_answer(text: &str, chain: &ChainSpec) -> Result<PlanningAnswer, ParseError> {
    let mut lx = Lexer::new(text);
    let mut velocity = None;
    let mut acceleration = None;
    let mut yaw = None;
    let mut history = None;
    let mut waypoints = None;
    for &e in chain.elements() {
        lx.expect_word(e.marker())?;
        match e {
            ChainElement::V => velocity = Some(lx.pair()?),
            ChainElement::A => acceleration = Some(lx.pair()?),
            ChainElement::Y => {
                lx.expect(Tok::LBracket, "'['")?;
                yaw = Some(lx.bin()?);
                lx.expect(Tok::RBracket, "']'")?;
            }
            ChainElement::T => history = Some(lx.pairs::<HISTORY_LEN>("history points")?),
            ChainElement::P => waypoints = Some(lx.pairs::<PLAN_LEN>("waypoints")?),
        }
    }
    lx.end()?;
    Ok(PlanningAnswer {
        velocity,
        acceleration,
        yaw,
        history,
        waypoints: waypoints.expect("chain always contains P"),
    })
}

/// Recover the chain from the order of field markers in `text`, then parse
/// strictly against it.
pub fn parse_planning_answer_any(text: &str) -> Result<(ChainSpec, PlanningAnswer), ParseError> {
    let mut lx = Lexer::new(text);
    let mut elements = Vec::new();
    loop {
        let (offset, tok) = lx.next();
        let e = match tok {
            Tok::End => break,
            Tok::Word("VEL") => ChainElement::V,
            Tok::Word("ACC") => ChainElement::A,
            Tok::Word("YAW") => ChainElement::Y,
            Tok::Word("HIST") => ChainElement::T,
            Tok::Word("WP") => ChainElement::P,
            _ => continue,
        };
        if elements.contains(&e) {
            return Err(ParseError {
                offset,
                expected: "each field at most once".into(),
                found: e.marker().into(),
            });
        }
        elements.push(e);
    }
    let chain = ChainSpec::new(elements).map_err(|e| ParseError {
        offset: 0,
        expected: "a WP field".into(),
        found: e.to_string(),
    })?;
    let answer = parse_planning_answer(text, &chain)?;
    Ok((chain, answer))
}

pub fn parse_detection_answer(text: &str) -> Result<DetectionAnswer, ParseError> {
    let mut lx = Lexer::new(text);
    let mut objects = Vec::new();
    while lx.peek().1 != Tok::End {
        lx.expect_word("CAT")?;
        let category = match lx.peek().1 {
            Tok::Word(w) => match Category::from_name(w) {
                Some(c) => c,
                None => return lx.fail(category_vocabulary()),
            },
            _ => return lx.fail(category_vocabulary()),
        };
        lx.next();
        objects.push((category, lx.pair()?));
    }
    Ok(DetectionAnswer { objects })
}

fn category_vocabulary() -> String {
    let names: Vec<&str> = Category::ALL.iter().map(|c| c.name()).collect();
    format!("a category name (one of {})", names.join(", "))
}

pub fn parse_lane_answer(text: &str) -> Result<LaneAnswer, ParseError> {
    let mut lx = Lexer::new(text);
    let mut lanes = Vec::new();
    while lx.peek().1 != Tok::End {
        lx.expect_word("LANE")?;
        lanes.push(lx.pairs::<4>("lane points")?);
    }
    Ok(LaneAnswer { lanes })
}
