//! Instruction model, exact decimal fields, parser and renderer.

use std::fmt;

use super::{GcodeError, Result};

/// A decimal literal kept exactly as written: `mantissa * 10^-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    pub mantissa: u64,
    pub scale: u8,
    pub negative: bool,
}

impl Decimal {
    /// Fixed-point rendering of `value` with `decimals` places. Negative zero
    /// is normalised to zero.
    pub fn from_f64(value: f64, decimals: usize) -> Self {
        let text = format!("{value:.decimals$}");
        let mut d: Decimal = text.parse().expect("formatted float is a valid literal");
        if d.mantissa == 0 {
            d.negative = false;
        }
        d
    }

    pub fn to_f64(self) -> f64 {
        self.to_string().parse().expect("rendered decimal is a valid float")
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.mantissa.to_string();
        let scale = self.scale as usize;
        if self.negative {
            f.write_str("-")?;
        }
        if scale == 0 {
            return f.write_str(&digits);
        }
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (int, frac) = padded.split_at(padded.len() - scale);
        write!(f, "{int}.{frac}")
    }
}

/// Why a literal was rejected, with the offending character offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecimalError {
    pub offset: usize,
    pub message: &'static str,
}

impl std::str::FromStr for Decimal {
    type Err = DecimalError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        let mut i = 0;
        let negative = bytes.first() == Some(&b'-');
        if negative || bytes.first() == Some(&b'+') {
            i = 1;
        }
        let mut mantissa: u64 = 0;
        let mut scale: u8 = 0;
        let mut digits = 0;
        let mut seen_dot = false;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                b'0'..=b'9' => {
                    mantissa = mantissa
                        .checked_mul(10)
                        .and_then(|m| m.checked_add((c - b'0') as u64))
                        .ok_or(DecimalError {
                            offset: i,
                            message: "too many digits",
                        })?;
                    digits += 1;
                    if seen_dot {
                        scale += 1;
                    }
                }
                b'.' if !seen_dot => seen_dot = true,
                _ => {
                    return Err(DecimalError {
                        offset: i,
                        message: "invalid character in number",
                    })
                }
            }
            i += 1;
        }
        if digits == 0 {
            return Err(DecimalError {
                offset: s.len(),
                message: "missing digits",
            });
        }
        if scale > 18 {
            return Err(DecimalError {
                offset: s.len(),
                message: "too many fractional digits",
            });
        }
        Ok(Self {
            mantissa,
            scale,
            negative,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    /// `G0` travel.
    Travel,
    /// `G1` linear move.
    Linear,
}

/// One `G0`/`G1` move; fields keep their source order.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    pub kind: MoveKind,
    pub fields: Vec<(char, Decimal)>,
    /// Text after `;`, without the semicolon.
    pub comment: Option<String>,
}

impl Motion {
    pub fn field(&self, letter: char) -> Option<Decimal> {
        self.fields.iter().find(|(l, _)| *l == letter).map(|(_, d)| *d)
    }

    pub fn x(&self) -> Option<f64> {
        self.field('X').map(Decimal::to_f64)
    }
    pub fn y(&self) -> Option<f64> {
        self.field('Y').map(Decimal::to_f64)
    }
    pub fn z(&self) -> Option<f64> {
        self.field('Z').map(Decimal::to_f64)
    }
    pub fn e(&self) -> Option<f64> {
        self.field('E').map(Decimal::to_f64)
    }
    pub fn f(&self) -> Option<f64> {
        self.field('F').map(Decimal::to_f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Blank,
    /// Full-line comment, text after `;`.
    Comment(String),
    Move(Motion),
    /// Any other command, kept verbatim.
    Opaque(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrusionMode {
    /// `M82`: `E` is a cumulative position.
    Absolute,
    /// `M83`: `E` is the length fed by that move.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcodeProgram {
    pub lines: Vec<Line>,
}

impl GcodeProgram {
    pub fn motions(&self) -> impl Iterator<Item = &Motion> {
        self.lines.iter().filter_map(|l| match l {
            Line::Move(m) => Some(m),
            _ => None,
        })
    }

    /// Extrusion mode in force at the end of the header; the last `M82`
    /// or `M83` wins, absolute if neither occurs.
    pub fn extrusion_mode(&self) -> ExtrusionMode {
        self.lines
            .iter()
            .rev()
            .find_map(|l| match l {
                Line::Opaque(s) if command_word(s) == "M83" => Some(ExtrusionMode::Relative),
                Line::Opaque(s) if command_word(s) == "M82" => Some(ExtrusionMode::Absolute),
                _ => None,
            })
            .unwrap_or(ExtrusionMode::Absolute)
    }

    /// Canonical text: fields separated by single spaces, LF endings.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            match line {
                Line::Blank => {}
                Line::Comment(c) => {
                    out.push(';');
                    out.push_str(c);
                }
                Line::Opaque(s) => out.push_str(s),
                Line::Move(m) => {
                    out.push_str(match m.kind {
                        MoveKind::Travel => "G0",
                        MoveKind::Linear => "G1",
                    });
                    for (letter, value) in &m.fields {
                        out.push(' ');
                        out.push(*letter);
                        out.push_str(&value.to_string());
                    }
                    if let Some(c) = &m.comment {
                        out.push_str(" ;");
                        out.push_str(c);
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

fn command_word(s: &str) -> &str {
    s.split(|c: char| c.is_whitespace() || c == ';').next().unwrap_or("")
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> GcodeError {
    GcodeError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_motion(kind: MoveKind, body: &str, body_col: usize, line_no: usize) -> Result<Motion> {
    let (code, comment) = match body.find(';') {
        Some(k) => (&body[..k], Some(body[k + 1..].to_string())),
        None => (body, None),
    };
    let mut fields: Vec<(char, Decimal)> = Vec::new();
    let mut pos = 0;
    for word in code.split(' ') {
        let col = body_col + pos;
        pos += word.len() + 1;
        if word.is_empty() {
            continue;
        }
        let mut chars = word.chars();
        let letter = chars.next().expect("word is nonempty");
        if !matches!(letter, 'X' | 'Y' | 'Z' | 'E' | 'F') {
            return Err(parse_error(line_no, col, format!("unknown field {letter:?}")));
        }
        if fields.iter().any(|(l, _)| *l == letter) {
            return Err(parse_error(line_no, col, format!("duplicate field {letter}")));
        }
        let value: Decimal = chars
            .as_str()
            .parse()
            .map_err(|e: DecimalError| parse_error(line_no, col + 1 + e.offset, e.message))?;
        fields.push((letter, value));
    }
    Ok(Motion { kind, fields, comment })
}

/// Parses the emitted dialect. Columns in errors are 1-based.
pub fn parse_gcode(text: &str) -> Result<GcodeProgram> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            lines.push(Line::Blank);
            continue;
        }
        if let Some(rest) = raw.strip_prefix(';') {
            lines.push(Line::Comment(rest.to_string()));
            continue;
        }
        let word = command_word(raw);
        let kind = match word {
            "G0" => Some(MoveKind::Travel),
            "G1" => Some(MoveKind::Linear),
            _ => None,
        };
        match kind {
            Some(kind) => {
                let body = &raw[word.len()..];
                if !body.is_empty() && !body.starts_with([' ', ';']) {
                    return Err(parse_error(line_no, word.len() + 1, "expected a space after the command"));
                }
                lines.push(Line::Move(parse_motion(kind, body, word.len() + 1, line_no)?));
            }
            None => lines.push(Line::Opaque(raw.to_string())),
        }
    }
    Ok(GcodeProgram { lines })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn decimal_literals_are_exact() {
        for s in ["0.1", "200", "-0.30000", "15", "0.00001", "123456.78901"] {
            assert_eq!(dec(s).to_string(), s);
        }
        assert_eq!(dec("0.1").to_f64(), 0.1);
        assert!("1.2.3".parse::<Decimal>().is_err());
        assert!("-".parse::<Decimal>().is_err());
        assert!("1e5".parse::<Decimal>().is_err());
        assert_eq!(Decimal::from_f64(-0.000001, 5).to_string(), "0.00000");
        assert_eq!(Decimal::from_f64(85.6, 5).to_string(), "85.60000");
    }

    #[test]
    fn example_instruction() {
        let p = parse_gcode("G1 X0.1 Y200 Z0.3 F1500 E15\n").unwrap();
        let m = p.motions().next().unwrap();
        assert_eq!(m.kind, MoveKind::Linear);
        assert_eq!(m.field('X'), Some(dec("0.1")));
        assert_eq!(m.y(), Some(200.0));
        assert_eq!(m.z(), Some(0.3));
        assert_eq!(m.f(), Some(1500.0));
        assert_eq!(m.e(), Some(15.0));
    }

    #[test]
    fn empty_and_opaque() {
        assert!(parse_gcode("").unwrap().lines.is_empty());
        let text = "; header\nG21\nM83\nG28 X0\nG0 X1.00000 ; hop\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.lines[1], Line::Opaque("G21".into()));
        assert_eq!(p.extrusion_mode(), ExtrusionMode::Relative);
        assert_eq!(p.render(), text);
    }

    #[test]
    fn errors_carry_position() {
        match parse_gcode("G21\nG1 X1 Q2\n") {
            Err(GcodeError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 7)),
            other => panic!("{other:?}"),
        }
        match parse_gcode("G1 X1.5a\n") {
            Err(GcodeError::Parse { line, column, .. }) => assert_eq!((line, column), (1, 8)),
            other => panic!("{other:?}"),
        }
        assert!(parse_gcode("G1 X1 X2").is_err());
    }
}
