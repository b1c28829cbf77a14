//! Transformation directives and their typed clause schemas.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransformKind {
    Tile,
    StripMine,
    StripeMine,
    Unroll,
    UnrollAndJam,
    Interchange,
    Peel,
    Collapse,
    Distribute,
    Fuse,
    Reverse,
    Parallel,
}

impl TransformKind {
    pub const ALL: [TransformKind; 12] = [
        TransformKind::Tile,
        TransformKind::StripMine,
        TransformKind::StripeMine,
        TransformKind::Unroll,
        TransformKind::UnrollAndJam,
        TransformKind::Interchange,
        TransformKind::Peel,
        TransformKind::Collapse,
        TransformKind::Distribute,
        TransformKind::Fuse,
        TransformKind::Reverse,
        TransformKind::Parallel,
    ];

    /// Surface keyword used when printing directives.
    pub fn keyword(self) -> &'static str {
        match self {
            TransformKind::Tile => "tile",
            TransformKind::StripMine => "stripmine",
            TransformKind::StripeMine => "stripemine",
            TransformKind::Unroll => "unroll",
            TransformKind::UnrollAndJam => "unrollingandjam",
            TransformKind::Interchange => "interchange",
            TransformKind::Peel => "peel",
            TransformKind::Collapse => "collapse",
            TransformKind::Distribute => "distribute",
            TransformKind::Fuse => "fuse",
            TransformKind::Reverse => "reverse",
            TransformKind::Parallel => "parallel",
        }
    }

    pub fn from_keyword(word: &str) -> Option<TransformKind> {
        let kind = match word {
            "tile" => TransformKind::Tile,
            "stripmine" | "strip_mine" => TransformKind::StripMine,
            "stripemine" | "stripe_mine" => TransformKind::StripeMine,
            "unroll" => TransformKind::Unroll,
            "unrollingandjam" | "unrollandjam" | "unroll_and_jam" => TransformKind::UnrollAndJam,
            "interchange" => TransformKind::Interchange,
            "peel" => TransformKind::Peel,
            "collapse" => TransformKind::Collapse,
            "distribute" => TransformKind::Distribute,
            "fuse" => TransformKind::Fuse,
            "reverse" => TransformKind::Reverse,
            "parallel" => TransformKind::Parallel,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum SafetyMode {
    #[default]
    Default,
    Fallback,
    Force,
}

impl fmt::Display for SafetyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafetyMode::Default => "default",
            SafetyMode::Fallback => "fallback",
            SafetyMode::Force => "force",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseItem {
    Int(i64),
    Ident(String),
    /// Whitespace-separated identifiers forming one list element.
    Group(Vec<String>),
}

impl fmt::Display for ClauseItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseItem::Int(v) => write!(f, "{v}"),
            ClauseItem::Ident(s) => f.write_str(s),
            ClauseItem::Group(g) => f.write_str(&g.join(" ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub name: String,
    /// `None` for bare clauses such as `full`.
    pub args: Option<Vec<ClauseItem>>,
}

/// One transformation request as written in a pragma.
#[derive(Debug, Clone)]
pub struct Directive {
    pub targets: Vec<String>,
    pub kind: TransformKind,
    pub clauses: Vec<Clause>,
    /// `None` when no modifier was written; the driver may then apply a
    /// global override.
    pub mode: Option<SafetyMode>,
    pub required: bool,
    /// Source line of the pragma (not part of structural equality).
    pub line: usize,
}

impl PartialEq for Directive {
    fn eq(&self, other: &Self) -> bool {
        self.targets == other.targets
            && self.kind == other.kind
            && self.clauses == other.clauses
            && self.mode == other.mode
            && self.required == other.required
    }
}

impl Eq for Directive {}

impl Directive {
    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn effective_mode(&self) -> SafetyMode {
        self.mode.unwrap_or_default()
    }

    /// Typed view of the clauses. Parsing already validated them, so this
    /// only fails for directives assembled by hand.
    pub fn request(&self) -> Result<Request, ClauseError> {
        Request::from_directive(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClauseError {
    #[error("unknown clause '{clause}' for {kind}")]
    Unknown { kind: TransformKind, clause: String },
    #[error("duplicate clause '{0}'")]
    Duplicate(String),
    #[error("missing clause '{clause}' for {kind}")]
    Missing { kind: TransformKind, clause: String },
    #[error("malformed clause '{clause}': {detail}")]
    Malformed { clause: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TilePeel {
    None,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnrollFactor {
    Full,
    Partial(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeelSpec {
    First(i64),
    Last(i64),
    Multiple(i64),
}

/// Clause values decoded per transformation kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Tile {
        sizes: Vec<i64>,
        floor_ids: Option<Vec<String>>,
        tile_ids: Option<Vec<String>>,
        peel: TilePeel,
    },
    StripMine {
        size: i64,
        floor_id: Option<String>,
        tile_id: Option<String>,
    },
    StripeMine {
        count: i64,
        outer_id: Option<String>,
        inner_id: Option<String>,
    },
    Unroll {
        factor: UnrollFactor,
        floor_id: Option<String>,
    },
    UnrollAndJam {
        factor: i64,
        floor_id: Option<String>,
    },
    Interchange {
        permutation: Vec<String>,
    },
    Peel {
        spec: PeelSpec,
        prologue_id: Option<String>,
        main_id: Option<String>,
        epilogue_id: Option<String>,
    },
    Collapse {
        depth: Option<usize>,
        collapsed_id: Option<String>,
    },
    Distribute {
        parts: Option<Vec<Vec<String>>>,
        ids: Option<Vec<String>>,
    },
    Fuse {
        fused_id: Option<String>,
    },
    Reverse {
        reversed_id: Option<String>,
    },
    Parallel,
}

#[derive(Clone, Copy)]
enum Arg {
    /// Bare clause, no parentheses.
    Flag,
    Int,
    Ints,
    Ident,
    Idents,
    Groups,
}

fn schema(kind: TransformKind) -> &'static [(&'static str, Arg)] {
    use Arg::*;
    match kind {
        TransformKind::Tile => &[
            ("sizes", Ints),
            ("floor_ids", Idents),
            ("tile_ids", Idents),
            ("peel", Ident),
        ],
        TransformKind::StripMine => &[("size", Int), ("floor_id", Ident), ("tile_id", Ident)],
        TransformKind::StripeMine => &[("count", Int), ("outer_id", Ident), ("inner_id", Ident)],
        TransformKind::Unroll => &[("factor", Int), ("full", Flag), ("floor_id", Ident)],
        TransformKind::UnrollAndJam => &[("factor", Int), ("floor_id", Ident)],
        TransformKind::Interchange => &[("permutation", Idents)],
        TransformKind::Peel => &[
            ("first", Int),
            ("last", Int),
            ("multiple", Int),
            ("prologue_id", Ident),
            ("main_id", Ident),
            ("epilogue_id", Ident),
        ],
        TransformKind::Collapse => &[("depth", Int), ("collapsed_id", Ident)],
        TransformKind::Distribute => &[("parts", Groups), ("ids", Idents)],
        TransformKind::Fuse => &[("fused_id", Ident)],
        TransformKind::Reverse => &[("reversed_id", Ident)],
        TransformKind::Parallel => &[],
    }
}

/// Checks clause names, uniqueness and argument shapes against the
/// kind's schema.
pub fn validate_clauses(kind: TransformKind, clauses: &[Clause]) -> Result<(), ClauseError> {
    for (i, c) in clauses.iter().enumerate() {
        if clauses[..i].iter().any(|p| p.name == c.name) {
            return Err(ClauseError::Duplicate(c.name.clone()));
        }
        let Some((_, arg)) = schema(kind).iter().find(|(n, _)| *n == c.name) else {
            return Err(ClauseError::Unknown {
                kind,
                clause: c.name.clone(),
            });
        };
        let malformed = |detail: &str| ClauseError::Malformed {
            clause: c.name.clone(),
            detail: detail.to_string(),
        };
        match (arg, &c.args) {
            (Arg::Flag, None) => {}
            (Arg::Flag, Some(_)) => return Err(malformed("takes no arguments")),
            (_, None) => return Err(malformed("expects a parenthesized argument list")),
            (Arg::Int, Some(a)) => {
                if a.len() != 1 || !matches!(a[0], ClauseItem::Int(_)) {
                    return Err(malformed("expects one integer"));
                }
            }
            (Arg::Ints, Some(a)) => {
                if a.is_empty() || !a.iter().all(|i| matches!(i, ClauseItem::Int(_))) {
                    return Err(malformed("expects a list of integers"));
                }
            }
            (Arg::Ident, Some(a)) => {
                if a.len() != 1 || !matches!(a[0], ClauseItem::Ident(_)) {
                    return Err(malformed("expects one identifier"));
                }
            }
            (Arg::Idents, Some(a)) => {
                if a.is_empty() || !a.iter().all(|i| matches!(i, ClauseItem::Ident(_))) {
                    return Err(malformed("expects a list of identifiers"));
                }
            }
            (Arg::Groups, Some(a)) => {
                if a.is_empty() || a.iter().any(|i| matches!(i, ClauseItem::Int(_))) {
                    return Err(malformed("expects groups of statement ids"));
                }
            }
        }
    }
    // Semantic checks that need the decoded values.
    Request::decode(kind, clauses).map(|_| ())
}

struct Clauses<'a> {
    kind: TransformKind,
    list: &'a [Clause],
}

impl<'a> Clauses<'a> {
    fn get(&self, name: &str) -> Option<&'a Clause> {
        self.list.iter().find(|c| c.name == name)
    }

    fn items(&self, name: &str) -> Option<&'a [ClauseItem]> {
        self.get(name).and_then(|c| c.args.as_deref())
    }

    fn int(&self, name: &str) -> Option<i64> {
        self.items(name).and_then(|a| match a.first() {
            Some(ClauseItem::Int(v)) => Some(*v),
            _ => None,
        })
    }

    fn ints(&self, name: &str) -> Option<Vec<i64>> {
        self.items(name).map(|a| {
            a.iter()
                .filter_map(|i| match i {
                    ClauseItem::Int(v) => Some(*v),
                    _ => None,
                })
                .collect()
        })
    }

    fn ident(&self, name: &str) -> Option<String> {
        self.items(name).and_then(|a| match a.first() {
            Some(ClauseItem::Ident(s)) => Some(s.clone()),
            _ => None,
        })
    }

    fn idents(&self, name: &str) -> Option<Vec<String>> {
        self.items(name).map(|a| {
            a.iter()
                .filter_map(|i| match i {
                    ClauseItem::Ident(s) => Some(s.clone()),
                    _ => None,
                })
                .collect()
        })
    }

    fn groups(&self, name: &str) -> Option<Vec<Vec<String>>> {
        self.items(name).map(|a| {
            a.iter()
                .map(|i| match i {
                    ClauseItem::Ident(s) => vec![s.clone()],
                    ClauseItem::Group(g) => g.clone(),
                    ClauseItem::Int(_) => vec![],
                })
                .collect()
        })
    }

    fn required_int(&self, name: &str) -> Result<i64, ClauseError> {
        self.int(name).ok_or_else(|| ClauseError::Missing {
            kind: self.kind,
            clause: name.to_string(),
        })
    }
}

fn malformed(clause: &str, detail: impl Into<String>) -> ClauseError {
    ClauseError::Malformed {
        clause: clause.to_string(),
        detail: detail.into(),
    }
}

impl Request {
    fn from_directive(d: &Directive) -> Result<Request, ClauseError> {
        Request::decode(d.kind, &d.clauses)
    }

    fn decode(kind: TransformKind, list: &[Clause]) -> Result<Request, ClauseError> {
        let c = Clauses { kind, list };
        let req = match kind {
            TransformKind::Tile => {
                let sizes = c.ints("sizes").ok_or_else(|| ClauseError::Missing {
                    kind,
                    clause: "sizes".into(),
                })?;
                if sizes.iter().any(|&s| s < 1) {
                    return Err(malformed("sizes", "tile sizes must be >= 1"));
                }
                let floor_ids = c.idents("floor_ids");
                let tile_ids = c.idents("tile_ids");
                for (name, ids) in [("floor_ids", &floor_ids), ("tile_ids", &tile_ids)] {
                    if let Some(ids) = ids {
                        if ids.len() != sizes.len() {
                            return Err(malformed(name, "length must match sizes"));
                        }
                    }
                }
                let peel = match c.ident("peel").as_deref() {
                    None | Some("none") => TilePeel::None,
                    Some("rectangular") => TilePeel::Rectangular,
                    Some(other) => {
                        return Err(malformed("peel", format!("unknown peel style '{other}'")))
                    }
                };
                Request::Tile {
                    sizes,
                    floor_ids,
                    tile_ids,
                    peel,
                }
            }
            TransformKind::StripMine => {
                let size = c.required_int("size")?;
                if size < 1 {
                    return Err(malformed("size", "strip size must be >= 1"));
                }
                Request::StripMine {
                    size,
                    floor_id: c.ident("floor_id"),
                    tile_id: c.ident("tile_id"),
                }
            }
            TransformKind::StripeMine => {
                let count = c.required_int("count")?;
                if count < 1 {
                    return Err(malformed("count", "stripe count must be >= 1"));
                }
                Request::StripeMine {
                    count,
                    outer_id: c.ident("outer_id"),
                    inner_id: c.ident("inner_id"),
                }
            }
            TransformKind::Unroll => {
                let factor = match (c.int("factor"), c.get("full")) {
                    (Some(_), Some(_)) => {
                        return Err(malformed("factor", "'factor' and 'full' are exclusive"))
                    }
                    (None, Some(_)) | (None, None) => UnrollFactor::Full,
                    (Some(f), None) if f >= 2 => UnrollFactor::Partial(f),
                    (Some(_), None) => return Err(malformed("factor", "unroll factor must be >= 2")),
                };
                if factor == UnrollFactor::Full && c.get("floor_id").is_some() {
                    return Err(malformed("floor_id", "full unrolling generates no loop"));
                }
                Request::Unroll {
                    factor,
                    floor_id: c.ident("floor_id"),
                }
            }
            TransformKind::UnrollAndJam => {
                let factor = c.required_int("factor")?;
                if factor < 2 {
                    return Err(malformed("factor", "unroll-and-jam factor must be >= 2"));
                }
                Request::UnrollAndJam {
                    factor,
                    floor_id: c.ident("floor_id"),
                }
            }
            TransformKind::Interchange => Request::Interchange {
                permutation: c.idents("permutation").ok_or_else(|| ClauseError::Missing {
                    kind,
                    clause: "permutation".into(),
                })?,
            },
            TransformKind::Peel => {
                let given: Vec<(&str, i64)> = ["first", "last", "multiple"]
                    .into_iter()
                    .filter_map(|n| c.int(n).map(|v| (n, v)))
                    .collect();
                let spec = match given.as_slice() {
                    [("first", k)] if *k >= 0 => PeelSpec::First(*k),
                    [("last", k)] if *k >= 0 => PeelSpec::Last(*k),
                    [("multiple", n)] if *n >= 1 => PeelSpec::Multiple(*n),
                    [] => {
                        return Err(ClauseError::Missing {
                            kind,
                            clause: "first|last|multiple".into(),
                        })
                    }
                    [(name, _)] => return Err(malformed(name, "count out of range")),
                    _ => return Err(malformed("first", "exactly one of first/last/multiple")),
                };
                Request::Peel {
                    spec,
                    prologue_id: c.ident("prologue_id"),
                    main_id: c.ident("main_id"),
                    epilogue_id: c.ident("epilogue_id"),
                }
            }
            TransformKind::Collapse => {
                let depth = match c.int("depth") {
                    Some(d) if d >= 1 => Some(d as usize),
                    Some(_) => return Err(malformed("depth", "collapse depth must be >= 1")),
                    None => None,
                };
                Request::Collapse {
                    depth,
                    collapsed_id: c.ident("collapsed_id"),
                }
            }
            TransformKind::Distribute => Request::Distribute {
                parts: c.groups("parts"),
                ids: c.idents("ids"),
            },
            TransformKind::Fuse => Request::Fuse {
                fused_id: c.ident("fused_id"),
            },
            TransformKind::Reverse => Request::Reverse {
                reversed_id: c.ident("reversed_id"),
            },
            TransformKind::Parallel => Request::Parallel,
        };
        Ok(req)
    }

    /// Number of nested loops the request operates on, when fixed by its
    /// clauses.
    pub fn nest_depth(&self) -> Option<usize> {
        match self {
            Request::Tile { sizes, .. } => Some(sizes.len()),
            Request::Interchange { permutation } => Some(permutation.len()),
            Request::Collapse { depth, .. } => *depth,
            _ => None,
        }
    }
}
