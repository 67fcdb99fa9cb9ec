use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::Token;

/// How cell tokens encode objects: token 0 is an empty cell and token
/// `1 + shape * n_colors + color` is an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenLayout {
    pub grid_w: usize,
    pub grid_h: usize,
    pub n_shapes: usize,
    pub n_colors: usize,
}

impl TokenLayout {
    pub fn new(grid_w: usize, grid_h: usize, n_shapes: usize, n_colors: usize) -> Result<Self> {
        if grid_w == 0 || grid_h == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
        }
        if n_shapes == 0 || n_colors == 0 {
            return Err(Error::InvalidParameter("need at least one shape and one color".into()));
        }
        if 1 + n_shapes * n_colors > Token::MAX as usize {
            return Err(Error::InvalidParameter("too many attribute combinations".into()));
        }
        Ok(Self { grid_w, grid_h, n_shapes, n_colors })
    }

    /// Layout for a plain `K`-token vocabulary: one shape, `K - 1` colors.
    pub fn plain(grid_w: usize, grid_h: usize, vocab: usize) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::InvalidParameter("vocabulary needs at least 2 tokens".into()));
        }
        Self::new(grid_w, grid_h, 1, vocab - 1)
    }

    pub fn len(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vocab(&self) -> usize {
        1 + self.n_shapes * self.n_colors
    }

    pub fn cell_index(&self, col: usize, row: usize) -> usize {
        row * self.grid_w + col
    }

    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index % self.grid_w, index / self.grid_w)
    }

    pub fn object_token(&self, shape: usize, color: usize) -> Token {
        (1 + shape * self.n_colors + color) as Token
    }

    /// `(shape, color)` of an object token, `None` for the empty token.
    pub fn object_of(&self, token: Token) -> Option<(usize, usize)> {
        if token == 0 {
            return None;
        }
        let t = token as usize - 1;
        Some((t / self.n_colors, t % self.n_colors))
    }

    /// Indices of cells within Chebyshev distance 1 of `index`, excluding
    /// the cell itself.
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (c, r) = self.cell_coords(index);
        let (c, r) = (c as isize, r as isize);
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (c + dc, r + dr)))
            .filter(move |&(cc, rr)| {
                (cc, rr) != (c, r)
                    && cc >= 0
                    && rr >= 0
                    && (cc as usize) < self.grid_w
                    && (rr as usize) < self.grid_h
            })
            .map(move |(cc, rr)| self.cell_index(cc as usize, rr as usize))
    }
}

/// Attribute filter; `None` matches anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Attribute {
    pub shape: Option<u8>,
    pub color: Option<u8>,
}

impl Attribute {
    pub fn new(shape: u8, color: u8) -> Self {
        Self { shape: Some(shape), color: Some(color) }
    }

    pub fn matches(&self, layout: &TokenLayout, token: Token) -> bool {
        match layout.object_of(token) {
            None => false,
            Some((s, c)) => {
                self.shape.is_none_or(|x| x as usize == s) && self.color.is_none_or(|x| x as usize == c)
            }
        }
    }

    fn validate(&self, layout: &TokenLayout) -> bool {
        self.shape.is_none_or(|s| (s as usize) < layout.n_shapes)
            && self.color.is_none_or(|c| (c as usize) < layout.n_colors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    LeftOf,
    Above,
}

/// A constraint on a rendered token grid.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionSpec {
    /// The cell holds some object.
    ObjectAtCell { col: u8, row: u8 },
    /// Some cell holds an object with the attribute.
    AttributePresent(Attribute),
    /// Two objects in distinct cells stand in the relation.
    Relation { first: Attribute, relation: Relation, second: Attribute },
    /// An opaque conjunction, used as a single condition id by joint-prompt
    /// baselines. Members are kept sorted and deduplicated.
    Joint(Vec<ConditionSpec>),
}

impl ConditionSpec {
    pub fn at(col: u8, row: u8) -> Self {
        Self::ObjectAtCell { col, row }
    }

    pub fn joint(mut members: Vec<ConditionSpec>) -> Self {
        members.sort();
        members.dedup();
        Self::Joint(members)
    }

    pub fn holds(&self, grid: &[Token], layout: &TokenLayout) -> bool {
        match self {
            Self::ObjectAtCell { col, row } => {
                grid[layout.cell_index(*col as usize, *row as usize)] != 0
            }
            Self::AttributePresent(a) => grid.iter().any(|&t| a.matches(layout, t)),
            Self::Relation { first, relation, second } => {
                for (i, &ta) in grid.iter().enumerate() {
                    if !first.matches(layout, ta) {
                        continue;
                    }
                    let (ca, ra) = layout.cell_coords(i);
                    for (j, &tb) in grid.iter().enumerate() {
                        if i == j || !second.matches(layout, tb) {
                            continue;
                        }
                        let (cb, rb) = layout.cell_coords(j);
                        let ok = match relation {
                            Relation::LeftOf => ca < cb,
                            Relation::Above => ra < rb,
                        };
                        if ok {
                            return true;
                        }
                    }
                }
                false
            }
            Self::Joint(members) => members.iter().all(|m| m.holds(grid, layout)),
        }
    }

    /// Checks payload bounds. Relations are only accepted when
    /// `allow_relations` is set.
    pub fn validate(&self, layout: &TokenLayout, allow_relations: bool) -> Result<()> {
        let ok = match self {
            Self::ObjectAtCell { col, row } => (*col as usize) < layout.grid_w && (*row as usize) < layout.grid_h,
            Self::AttributePresent(a) => a.validate(layout),
            Self::Relation { first, second, .. } => {
                if !allow_relations {
                    return Err(Error::InvalidCondition(format!("{self} (relations need a relational world)")));
                }
                first.validate(layout) && second.validate(layout)
            }
            Self::Joint(members) => {
                for m in members {
                    m.validate(layout, allow_relations)?;
                }
                true
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidCondition(format!("{self} (out of world bounds)")))
        }
    }
}

/// Evaluates every condition on a fully unmasked grid.
pub fn check_conditions(grid: &[Token], conds: &[ConditionSpec], layout: &TokenLayout) -> Vec<bool> {
    conds.iter().map(|c| c.holds(grid, layout)).collect()
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.shape, self.color) {
            (None, None) => f.write_str("any"),
            (Some(s), None) => write!(f, "shape={s}"),
            (None, Some(c)) => write!(f, "color={c}"),
            (Some(s), Some(c)) => write!(f, "shape={s},color={c}"),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::LeftOf => "left_of",
            Relation::Above => "above",
        })
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ObjectAtCell { col, row } => write!(f, "object_at_cell({col},{row})"),
            Self::AttributePresent(a) => write!(f, "attribute_present({a})"),
            Self::Relation { first, relation, second } => write!(f, "relation({first};{relation};{second})"),
            Self::Joint(members) => {
                f.write_str("joint(")?;
                for (i, m) in members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{m}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn parse_err(s: &str) -> Error {
    Error::InvalidCondition(format!("cannot parse {s:?}"))
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut attr = Attribute::default();
        if s == "any" || s.is_empty() {
            return Ok(attr);
        }
        for part in s.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(|| parse_err(s))?;
            let value: u8 = value.trim().parse().map_err(|_| parse_err(s))?;
            match key.trim() {
                "shape" if attr.shape.is_none() => attr.shape = Some(value),
                "color" if attr.color.is_none() => attr.color = Some(value),
                _ => return Err(parse_err(s)),
            }
        }
        Ok(attr)
    }
}

/// Splits on `sep` outside parentheses.
fn split_top_level<'a>(s: &'a str, sep: &str) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => depth -= 1,
            _ if depth == 0 && s[i..].starts_with(sep) => {
                parts.push(&s[start..i]);
                i += sep.len();
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    parts.push(&s[start..]);
    parts
}

impl FromStr for ConditionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| parse_err(s))?;
        if !s.ends_with(')') {
            return Err(parse_err(s));
        }
        let name = s[..open].trim();
        let body = &s[open + 1..s.len() - 1];
        match name {
            "object_at_cell" => {
                let (c, r) = body.split_once(',').ok_or_else(|| parse_err(s))?;
                Ok(Self::ObjectAtCell {
                    col: c.trim().parse().map_err(|_| parse_err(s))?,
                    row: r.trim().parse().map_err(|_| parse_err(s))?,
                })
            }
            "attribute_present" => Ok(Self::AttributePresent(body.parse()?)),
            "relation" => {
                let parts: Vec<&str> = body.split(';').collect();
                if parts.len() != 3 {
                    return Err(parse_err(s));
                }
                let relation = match parts[1].trim() {
                    "left_of" => Relation::LeftOf,
                    "above" => Relation::Above,
                    _ => return Err(parse_err(s)),
                };
                Ok(Self::Relation { first: parts[0].parse()?, relation, second: parts[2].parse()? })
            }
            "joint" => {
                if body.trim().is_empty() {
                    return Ok(Self::Joint(Vec::new()));
                }
                let members = split_top_level(body, "&")
                    .into_iter()
                    .map(str::parse)
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::joint(members))
            }
            _ => Err(parse_err(s)),
        }
    }
}

impl From<&ConditionSpec> for String {
    fn from(c: &ConditionSpec) -> Self {
        c.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn layout() -> TokenLayout {
        TokenLayout::new(3, 3, 2, 2).unwrap()
    }

    #[test]
    fn token_codes_roundtrip() {
        let l = layout();
        assert_eq!(l.vocab(), 5);
        for s in 0..2 {
            for c in 0..2 {
                assert_eq!(l.object_of(l.object_token(s, c)), Some((s, c)));
            }
        }
        assert_eq!(l.object_of(0), None);
    }

    #[test]
    fn neighbors_of_corner_and_center() {
        let l = layout();
        let mut corner: Vec<usize> = l.neighbors(0).collect();
        corner.sort();
        assert_eq!(corner, vec![1, 3, 4]);
        assert_eq!(l.neighbors(4).count(), 8);
    }

    #[test]
    fn object_at_cell_on_empty_grid_is_false() {
        let l = layout();
        let grid = vec![0; 9];
        assert!(!ConditionSpec::at(1, 1).holds(&grid, &l));
        let mut grid = grid;
        grid[l.cell_index(1, 1)] = l.object_token(1, 0);
        assert!(ConditionSpec::at(1, 1).holds(&grid, &l));
    }

    #[test]
    fn relations() {
        let l = layout();
        let red = Attribute::new(0, 0);
        let blue = Attribute::new(0, 1);
        let mut grid = vec![0; 9];
        grid[l.cell_index(0, 2)] = l.object_token(0, 0);
        grid[l.cell_index(2, 0)] = l.object_token(0, 1);
        let left = ConditionSpec::Relation { first: red, relation: Relation::LeftOf, second: blue };
        let above = ConditionSpec::Relation { first: red, relation: Relation::Above, second: blue };
        let below = ConditionSpec::Relation { first: blue, relation: Relation::Above, second: red };
        assert_eq!(check_conditions(&grid, &[left, above, below], &l), vec![true, false, true]);
    }

    #[test]
    fn same_cell_never_relates_to_itself() {
        let l = layout();
        let any = Attribute::default();
        let mut grid = vec![0; 9];
        grid[0] = 1;
        let c = ConditionSpec::Relation { first: any, relation: Relation::LeftOf, second: any };
        assert!(!c.holds(&grid, &l));
    }

    #[test]
    fn validation_bounds() {
        let l = layout();
        assert!(ConditionSpec::at(2, 2).validate(&l, false).is_ok());
        assert!(ConditionSpec::at(3, 0).validate(&l, false).is_err());
        let rel = ConditionSpec::Relation {
            first: Attribute::default(),
            relation: Relation::Above,
            second: Attribute::default(),
        };
        assert!(rel.validate(&l, false).is_err());
        assert!(rel.validate(&l, true).is_ok());
        let bad_attr = ConditionSpec::AttributePresent(Attribute { shape: Some(2), color: None });
        assert!(bad_attr.validate(&l, false).is_err());
    }

    #[test]
    fn text_form_roundtrips() {
        let conds = vec![
            ConditionSpec::at(0, 2),
            ConditionSpec::AttributePresent(Attribute { shape: None, color: Some(1) }),
            ConditionSpec::AttributePresent(Attribute::default()),
            ConditionSpec::Relation {
                first: Attribute::new(1, 0),
                relation: Relation::LeftOf,
                second: Attribute { shape: Some(0), color: None },
            },
            ConditionSpec::joint(vec![ConditionSpec::at(1, 1), ConditionSpec::at(0, 0)]),
            ConditionSpec::joint(vec![]),
        ];
        for c in conds {
            let text = c.to_string();
            assert_eq!(text.parse::<ConditionSpec>().unwrap(), c, "{text}");
        }
        assert!("object_at_cell(1)".parse::<ConditionSpec>().is_err());
        assert!("nonsense".parse::<ConditionSpec>().is_err());
    }
}
