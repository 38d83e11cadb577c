//! JSON schemas for measures and Nevanlinna functions, the function-spec
//! mini-language used on the command line, and CSV output.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::AnalyticFn;
use crate::conformal::PsiForm;
use crate::error::{Error, Result};
use crate::levyflow::FlowField;
use crate::measure::{AcPiece, Atom, Density, Measure};
use crate::nevanlinna::{NevanlinnaSpec, RationalNevanlinna};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AtomJson {
    u: f64,
    mass: f64,
}

/// Interval end: a number, or `"-inf"` / `"inf"` / `null` for an unbounded side.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
    Null(Option<()>),
}

impl Bound {
    fn value(&self, lower: bool) -> Result<f64> {
        match self {
            Bound::Num(v) => Ok(*v),
            Bound::Null(_) => Ok(if lower { f64::NEG_INFINITY } else { f64::INFINITY }),
            Bound::Text(s) => match s.trim() {
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => other.parse().map_err(|_| Error::Parse(format!("bad interval end {other:?}"))),
            },
        }
    }

    fn from_value(v: f64) -> Self {
        if v == f64::NEG_INFINITY {
            Bound::Text("-inf".into())
        } else if v == f64::INFINITY {
            Bound::Text("inf".into())
        } else {
            Bound::Num(v)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AcJson {
    lo: Bound,
    hi: Bound,
    density: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    /// `(u, value)` rows for `"density": "table"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct MeasureJson {
    #[serde(default)]
    atoms: Vec<AtomJson>,
    #[serde(default)]
    ac: Vec<AcJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NevanlinnaJson {
    alpha: f64,
    beta: f64,
    #[serde(default)]
    nu: MeasureJson,
}

fn density_from_name(name: &str, table: Option<&Vec<[f64; 2]>>) -> Result<Density> {
    let name = name.trim();
    match name {
        "sqrtNeg" => return Ok(Density::SqrtNeg),
        "invSqrtNeg" => return Ok(Density::InvSqrtNeg),
        "table" => {
            let rows = table.ok_or_else(|| Error::Parse("density \"table\" needs a \"table\" field".into()))?;
            return Ok(Density::Table(rows.iter().map(|r| (r[0], r[1])).collect()));
        }
        _ => {}
    }
    if let Some(arg) = call_arg(name, "semicircle") {
        return Ok(Density::Semicircle { t: parse_number(arg)? });
    }
    if let Some(arg) = call_arg(name, "cauchy") {
        return Ok(Density::Cauchy { scale: parse_number(arg)? });
    }
    Err(Error::Parse(format!("unknown density {name:?}")))
}

fn measure_from_json(m: &MeasureJson) -> Result<Measure> {
    let atoms = m.atoms.iter().map(|a| Atom { position: a.u, mass: a.mass }).collect();
    let mut pieces = Vec::with_capacity(m.ac.len());
    for p in &m.ac {
        let mut piece = AcPiece::new(p.lo.value(true)?, p.hi.value(false)?, density_from_name(&p.density, p.table.as_ref())?);
        if let Some(e) = p.tail_exponent {
            piece = piece.with_tail(e);
        }
        if let Some(w) = p.weight {
            piece = piece.with_weight(w);
        }
        pieces.push(piece);
    }
    Measure::new(atoms, pieces)
}

fn measure_to_json_struct(m: &Measure) -> Result<MeasureJson> {
    let atoms = m.atoms().iter().map(|a| AtomJson { u: a.position, mass: a.mass }).collect();
    let mut ac = Vec::new();
    for p in m.pieces() {
        let table = match &p.density {
            Density::Custom { label, .. } => {
                return Err(Error::Invalid(format!("density {label:?} has no JSON form")));
            }
            Density::Table(rows) => Some(rows.iter().map(|&(u, v)| [u, v]).collect()),
            _ => None,
        };
        ac.push(AcJson {
            lo: Bound::from_value(p.lo),
            hi: Bound::from_value(p.hi),
            density: p.density.name(),
            tail_exponent: p.tail_exponent,
            weight: (p.weight != 1.0).then_some(p.weight),
            table,
        });
    }
    Ok(MeasureJson { atoms, ac })
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    measure_from_json(&serde_json::from_str(text)?)
}

pub fn measure_to_json(m: &Measure) -> Result<Value> {
    Ok(serde_json::to_value(measure_to_json_struct(m)?)?)
}

pub fn parse_nevanlinna(text: &str) -> Result<NevanlinnaSpec> {
    let j: NevanlinnaJson = serde_json::from_str(text)?;
    NevanlinnaSpec::new(j.alpha, j.beta, measure_from_json(&j.nu)?)
}

pub fn nevanlinna_to_json(s: &NevanlinnaSpec) -> Result<Value> {
    Ok(serde_json::to_value(NevanlinnaJson {
        alpha: s.alpha,
        beta: s.beta,
        nu: measure_to_json_struct(&s.nu)?,
    })?)
}

pub fn parse_rational(text: &str) -> Result<RationalNevanlinna> {
    let r: RationalNevanlinna = serde_json::from_str(text)?;
    r.validate()?;
    Ok(r)
}

/// Reads a file, prefixing parse errors with its path.
pub fn read_with<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    parse(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Generator or `ψ` named on the command line.
///
/// Grammar: `negPow(ρ)`, `pow(θ)`, `const(re,im)`,
/// `rational(a=..,b=..,poles=[..],residues=[..])` or `rational({json})`,
/// `nevanlinna({json})`, or `@path.json` holding either JSON schema.
/// Numbers accept `p/q` and a trailing `…` or `...` repeating the last digit.
#[derive(Debug, Clone)]
pub enum FnSpec {
    NegPow(f64),
    Pow(f64),
    Const(Complex64),
    Rational(RationalNevanlinna),
    Nevanlinna(Box<NevanlinnaSpec>),
}

fn call_arg<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')
}

/// Decimal, `p/q`, or a repeating decimal such as `0.333…`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad number {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        return Ok(parse_number(p)? / parse_number(q)?);
    }
    let stem = s.strip_suffix('…').or_else(|| s.strip_suffix("...")).map(str::trim_end);
    let Some(stem) = stem else {
        return s.parse().map_err(|_| bad());
    };
    let base: f64 = stem.parse().map_err(|_| bad())?;
    let frac_digits = stem.split_once('.').map_or(0, |(_, f)| f.len());
    let last = stem.chars().last().and_then(|c| c.to_digit(10)).ok_or_else(bad)?;
    if frac_digits == 0 {
        return Err(bad());
    }
    // d.ddd… = d.ddd + last · 10^-n / 9
    let tail = last as f64 * 10f64.powi(-(frac_digits as i32)) / 9.0;
    Ok(if base < 0.0 || stem.starts_with('-') { base - tail } else { base + tail })
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected [..], got {s:?}")))?;
    inner.split(',').filter(|x| !x.trim().is_empty()).map(parse_number).collect()
}

/// Splits on commas outside brackets.
fn split_top(s: &str) -> Vec<&str> {
    let (mut depth, mut start, mut out) = (0i32, 0, Vec::new());
    for (i, c) in s.char_indices() {
        match c {
            '[' | '(' | '{' => depth += 1,
            ']' | ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_rational_args(args: &str) -> Result<RationalNevanlinna> {
    if args.trim_start().starts_with('{') {
        return parse_rational(args);
    }
    let (mut a, mut b, mut poles, mut residues) = (0.0, 0.0, Vec::new(), Vec::new());
    for part in split_top(args).into_iter().filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?}")))?;
        match key.trim() {
            "a" => a = parse_number(value)?,
            "b" => b = parse_number(value)?,
            "poles" => poles = parse_list(value)?,
            "residues" => residues = parse_list(value)?,
            k => return Err(Error::Parse(format!("unknown rational key {k:?}"))),
        }
    }
    RationalNevanlinna::new(a, b, poles, residues)
}

fn spec_from_json_text(text: &str) -> Result<FnSpec> {
    let v: Value = serde_json::from_str(text)?;
    if v.get("alpha").is_some() {
        Ok(FnSpec::Nevanlinna(Box::new(parse_nevanlinna(text)?)))
    } else if v.get("a").is_some() || v.get("poles").is_some() {
        Ok(FnSpec::Rational(parse_rational(text)?))
    } else {
        Err(Error::Parse("JSON is neither a NevanlinnaSpec nor a RationalNevanlinna".into()))
    }
}

impl FnSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix('@') {
            return read_with(Path::new(path), spec_from_json_text);
        }
        if let Some(arg) = call_arg(s, "negPow") {
            return Ok(FnSpec::NegPow(parse_number(arg)?));
        }
        if let Some(arg) = call_arg(s, "pow") {
            return Ok(FnSpec::Pow(parse_number(arg)?));
        }
        if let Some(arg) = call_arg(s, "const") {
            let parts = split_top(arg);
            let re = parse_number(parts[0])?;
            let im = match parts.get(1) {
                Some(p) => parse_number(p)?,
                None => 0.0,
            };
            if parts.len() > 2 {
                return Err(Error::Parse(format!("const takes (re, im), got {s:?}")));
            }
            return Ok(FnSpec::Const(Complex64::new(re, im)));
        }
        if let Some(arg) = call_arg(s, "rational") {
            return Ok(FnSpec::Rational(parse_rational_args(arg)?));
        }
        if let Some(arg) = call_arg(s, "nevanlinna") {
            return Ok(FnSpec::Nevanlinna(Box::new(parse_nevanlinna(arg)?)));
        }
        Err(Error::Parse(format!("unrecognised function spec {s:?}")))
    }

    pub fn label(&self) -> String {
        match self {
            FnSpec::NegPow(r) => format!("negPow({r})"),
            FnSpec::Pow(t) => format!("pow({t})"),
            FnSpec::Const(c) => format!("const({},{})", c.re, c.im),
            FnSpec::Rational(r) => PsiForm::Rational(r.clone()).label(),
            FnSpec::Nevanlinna(n) => format!("nevanlinna(alpha={},beta={})", n.alpha, n.beta),
        }
    }

    pub fn analytic(&self) -> AnalyticFn {
        match self {
            FnSpec::NegPow(r) => AnalyticFn::neg_pow(*r),
            FnSpec::Pow(t) => AnalyticFn::pow(*t),
            FnSpec::Const(c) => AnalyticFn::constant(*c),
            FnSpec::Rational(r) => r.to_analytic(),
            FnSpec::Nevanlinna(n) => n.to_analytic(),
        }
    }

    /// Flow field with the best available route.
    pub fn flow_field(&self) -> Result<FlowField> {
        match self {
            FnSpec::NegPow(r) => FlowField::neg_pow(*r),
            FnSpec::Const(c) => FlowField::constant(*c),
            _ => FlowField::new(self.analytic()),
        }
    }

    /// `ψ` for a conformal primitive.
    pub fn psi_form(&self) -> Result<PsiForm> {
        match self {
            FnSpec::NegPow(s) => PsiForm::power(*s),
            FnSpec::Pow(t) if *t == -0.5 => Ok(PsiForm::Spec(NevanlinnaSpec::inv_sqrt())),
            FnSpec::Pow(t) => Err(Error::Invalid(format!(
                "pow({t}) has no primitive form; use negPow, rational or nevanlinna"
            ))),
            FnSpec::Const(c) if c.im == 0.0 => Ok(PsiForm::Rational(RationalNevanlinna::new(0.0, c.re, vec![], vec![])?)),
            FnSpec::Const(c) if c.im < 0.0 => {
                // ∫(1+uz)/(z−u) du/(π(1+u²)) = −i on C+
                let piece = AcPiece::new(f64::NEG_INFINITY, f64::INFINITY, Density::Cauchy { scale: 1.0 })
                    .with_tail(2.0)
                    .with_weight(-c.im);
                Ok(PsiForm::Spec(NevanlinnaSpec::new(0.0, c.re, Measure::new(vec![], vec![piece])?)?))
            }
            FnSpec::Const(c) => Err(Error::Invalid(format!("const({},{}) is not Nevanlinna", c.re, c.im))),
            FnSpec::Rational(r) => Ok(PsiForm::Rational(r.clone())),
            FnSpec::Nevanlinna(n) => Ok(PsiForm::Spec((**n).clone())),
        }
    }
}

/// Formats a float so that the same value always prints the same bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

/// Writes a CSV file with the given header. Non-finite cells are left empty,
/// so every table that can contain them carries a flag column.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Io(e.into());
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `x,density,failed` rows of a density table.
pub fn density_rows(x: &[f64], density: &[f64], failed: &[bool]) -> Vec<Vec<String>> {
    x.iter()
        .zip(density)
        .zip(failed)
        .map(|((&x, &d), &f)| vec![fmt_f64(x), fmt_f64(d), (f || !d.is_finite()).to_string()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeating_decimals() {
        assert!((parse_number("0.333…").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((parse_number("0.333...").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((parse_number("1/3").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(parse_number("-0.5").unwrap(), -0.5);
        assert!(parse_number("x").is_err());
    }

    #[test]
    fn function_specs() {
        assert!(matches!(FnSpec::parse("negPow(0.5)").unwrap(), FnSpec::NegPow(r) if r == 0.5));
        assert!(matches!(FnSpec::parse("pow(-0.5)").unwrap(), FnSpec::Pow(t) if t == -0.5));
        assert!(matches!(FnSpec::parse("const(0,-1)").unwrap(), FnSpec::Const(c) if c == Complex64::new(0.0, -1.0)));
        match FnSpec::parse("rational(a=-1,b=0,poles=[0],residues=[1])").unwrap() {
            FnSpec::Rational(r) => {
                assert_eq!((r.a, r.b), (-1.0, 0.0));
                assert_eq!((r.poles, r.residues), (vec![0.0], vec![1.0]));
            }
            other => panic!("{other:?}"),
        }
        let j = r#"rational({"a":-1,"b":0.5,"poles":[1,2],"residues":[1,3]})"#;
        assert!(matches!(FnSpec::parse(j).unwrap(), FnSpec::Rational(r) if r.poles == vec![1.0, 2.0]));
        assert!(FnSpec::parse("rational(a=-1,poles=[0],residues=[-1])").is_err());
        assert!(FnSpec::parse("sin(1)").is_err());
    }

    #[test]
    fn measure_json_roundtrip() {
        let text = r#"{"atoms":[{"u":1.5,"mass":0.25}],
            "ac":[{"lo":-2,"hi":2,"density":"semicircle(1)"},
                  {"lo":"-inf","hi":0,"density":"sqrtNeg","tailExponent":1.5},
                  {"lo":0,"hi":1,"density":"table","table":[[0,1],[1,1]]}]}"#;
        let m = parse_measure(text).unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.pieces().len(), 3);
        let mass = m.total_mass().unwrap();
        // 0.25 + 1 + 1 + ∫_{-∞}^0 √(−u)/(2π(1+u²)) du = 2.25 + 1/(2√2)
        assert!((mass - (2.25 + 0.5 / 2f64.sqrt())).abs() < 1e-8, "{mass}");
        let back = parse_measure(&measure_to_json(&m).unwrap().to_string()).unwrap();
        assert!((back.total_mass().unwrap() - mass).abs() < 1e-12);
    }

    #[test]
    fn nevanlinna_json() {
        let text = r#"{"alpha":-1,"beta":0.5,"nu":{"atoms":[{"u":0,"mass":1}]}}"#;
        let s = parse_nevanlinna(text).unwrap();
        // −z + 0.5 + 1/z at z = i
        let v = s.eval(Complex64::i()).unwrap();
        assert!((v - Complex64::new(0.5, -2.0)).norm() < 1e-12);
        let back = parse_nevanlinna(&nevanlinna_to_json(&s).unwrap().to_string()).unwrap();
        assert!((back.eval(Complex64::i()).unwrap() - v).norm() < 1e-12);
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = parse_measure("{\"atoms\": [\n {\"u\": 1}]}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_measure(r#"{"ac":[{"lo":0,"hi":1,"density":"nope"}]}"#).is_err());
    }
}
