//! Grid specifications such as `uniform(-2, 2, 10)` or
//! `product(random(-2, 2, 10, 1), random(-2, 2, 10, 2))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `n` evenly spaced points from `a` to `b` inclusive.
    Uniform { a: f64, b: f64, n: usize },
    /// `n` uniform draws in `[a, b)` from `seed`.
    Random { a: f64, b: f64, n: usize, seed: u64 },
    Values(Vec<f64>),
    /// Cartesian product, first factor slowest.
    Product(Vec<GridSpec>),
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cleaned: String = text.chars().map(|c| if c == '\u{2212}' { '-' } else { c }).collect();
        let mut p = Parser { s: cleaned.as_bytes(), pos: 0 };
        let g = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(format!("trailing input at column {}", p.pos + 1));
        }
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<(), String> {
        match self {
            GridSpec::Uniform { a, b, n } => {
                if *n == 0 {
                    return Err("uniform grid needs at least one point".into());
                }
                if *n > 1 && a == b {
                    return Err("uniform grid endpoints coincide".into());
                }
                Ok(())
            }
            GridSpec::Random { a, b, n, .. } => {
                if *n == 0 || a.is_nan() || b.is_nan() || b <= a {
                    return Err("random grid needs n >= 1 and a < b".into());
                }
                Ok(())
            }
            GridSpec::Values(v) if v.is_empty() => Err("values() is empty".into()),
            GridSpec::Values(_) => Ok(()),
            GridSpec::Product(fs) => {
                if fs.is_empty() {
                    return Err("product() is empty".into());
                }
                fs.iter().try_for_each(GridSpec::check)
            }
        }
    }

    /// Number of coordinates per point.
    pub fn dim(&self) -> usize {
        match self {
            GridSpec::Product(fs) => fs.iter().map(GridSpec::dim).sum(),
            _ => 1,
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            GridSpec::Uniform { a, b, n } => {
                if *n == 1 {
                    return vec![vec![*a]];
                }
                (0..*n).map(|i| vec![a + (b - a) * i as f64 / (*n - 1) as f64]).collect()
            }
            GridSpec::Random { a, b, n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*n).map(|_| vec![rng.gen_range(*a..*b)]).collect()
            }
            GridSpec::Values(v) => v.iter().map(|&x| vec![x]).collect(),
            GridSpec::Product(fs) => fs.iter().fold(vec![Vec::new()], |acc, f| {
                let pts = f.points();
                acc.iter()
                    .flat_map(|head| {
                        pts.iter().map(move |tail| {
                            let mut p = head.clone();
                            p.extend_from_slice(tail);
                            p
                        })
                    })
                    .collect()
            }),
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

enum Arg {
    Num(f64),
    Grid(GridSpec),
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<(), String> {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(format!("expected '{}' at column {}", c as char, self.pos + 1))
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn arg(&mut self) -> Result<Arg, String> {
        self.skip_ws();
        if self.s.get(self.pos).is_some_and(|c| c.is_ascii_alphabetic()) {
            return Ok(Arg::Grid(self.expr()?));
        }
        let start = self.pos;
        while self.pos < self.s.len() && matches!(self.s[self.pos], b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E') {
            self.pos += 1;
        }
        let tok = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        tok.parse::<f64>()
            .map(Arg::Num)
            .map_err(|_| format!("expected a number at column {}", start + 1))
    }

    fn expr(&mut self) -> Result<GridSpec, String> {
        let name = self.ident();
        if name.is_empty() {
            return Err(format!("expected a grid name at column {}", self.pos + 1));
        }
        self.eat(b'(')?;
        let mut args = Vec::new();
        self.skip_ws();
        if self.s.get(self.pos) != Some(&b')') {
            loop {
                args.push(self.arg()?);
                self.skip_ws();
                if self.s.get(self.pos) == Some(&b',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.eat(b')')?;
        build(&name, args)
    }
}

fn count(x: f64, what: &str) -> Result<usize, String> {
    if x >= 0.0 && x.fract() == 0.0 && x < 1e9 {
        Ok(x as usize)
    } else {
        Err(format!("{what} must be a non-negative integer, got {x}"))
    }
}

fn build(name: &str, args: Vec<Arg>) -> Result<GridSpec, String> {
    let nums = |args: &[Arg]| -> Result<Vec<f64>, String> {
        args.iter()
            .map(|a| match a {
                Arg::Num(x) => Ok(*x),
                Arg::Grid(_) => Err(format!("{name}() takes numbers only")),
            })
            .collect()
    };
    match name {
        "uniform" => match nums(&args)?.as_slice() {
            [a, b, n] => Ok(GridSpec::Uniform { a: *a, b: *b, n: count(*n, "n")? }),
            _ => Err("uniform(a, b, n) takes three arguments".into()),
        },
        "random" => match nums(&args)?.as_slice() {
            [a, b, n, seed] => {
                Ok(GridSpec::Random { a: *a, b: *b, n: count(*n, "n")?, seed: count(*seed, "seed")? as u64 })
            }
            _ => Err("random(a, b, n, seed) takes four arguments".into()),
        },
        "values" => Ok(GridSpec::Values(nums(&args)?)),
        "product" => args
            .into_iter()
            .map(|a| match a {
                Arg::Grid(g) => Ok(g),
                Arg::Num(_) => Err("product() takes grids only".to_string()),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(GridSpec::Product),
        other => Err(format!("unknown grid '{other}'")),
    }
}
