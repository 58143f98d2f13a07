use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest input width accepted for a truth table.
pub const MAX_TABLE_INPUT_BITS: usize = 24;

/// A classical function {0,1}^n → {0,1}^m stored as a truth table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalFunction {
    input_bits: usize,
    output_bits: usize,
    table: Vec<usize>,
}

impl ClassicalFunction {
    pub fn new(input_bits: usize, output_bits: usize, table: Vec<usize>) -> Result<Self> {
        if input_bits > MAX_TABLE_INPUT_BITS {
            return Err(Error::Table(format!("input width {input_bits} too large")));
        }
        if output_bits == 0 || output_bits > 32 {
            return Err(Error::Table(format!("output width {output_bits} out of range 1..=32")));
        }
        if table.len() != 1 << input_bits {
            return Err(Error::Table(format!(
                "expected {} entries for n={input_bits}, got {}",
                1usize << input_bits,
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&v| v >> output_bits != 0) {
            return Err(Error::Table(format!("value {bad} does not fit in {output_bits} bits")));
        }
        Ok(ClassicalFunction {
            input_bits,
            output_bits,
            table,
        })
    }

    pub fn from_fn(input_bits: usize, output_bits: usize, f: impl Fn(usize) -> usize) -> Result<Self> {
        Self::new(input_bits, output_bits, (0..1usize << input_bits).map(f).collect())
    }

    /// The 1-bit indicator of a single input (or the constant-zero function).
    pub fn indicator(input_bits: usize, marked: Option<usize>) -> Result<Self> {
        Self::from_fn(input_bits, 1, |x| usize::from(Some(x) == marked))
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_bits(&self) -> usize {
        self.output_bits
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    #[inline]
    pub fn eval(&self, x: usize) -> usize {
        self.table[x]
    }

    /// Distribution of f(X) for uniform X, indexed by output value.
    pub fn output_distribution(&self) -> Vec<f64> {
        let mut counts = vec![0.0; 1 << self.output_bits];
        for &v in &self.table {
            counts[v] += 1.0;
        }
        let total = self.table.len() as f64;
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    }

    /// Table text: one line per input, MSB-first binary of the value.
    pub fn to_table_text(&self) -> String {
        let mut out = String::with_capacity(self.table.len() * (self.output_bits + 1));
        for &v in &self.table {
            out.push_str(&format!("{v:0width$b}\n", width = self.output_bits));
        }
        out
    }
}

/// Reads a table: 2^n lines, each an m-character binary string (most
/// significant bit first). Blank lines and `#` comments are skipped. When
/// `input_bits`/`output_bits` are given the table must match them.
pub fn read_function_table<R: BufRead>(
    reader: R,
    input_bits: Option<usize>,
    output_bits: Option<usize>,
) -> Result<ClassicalFunction> {
    let mut table = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if let Some(bad) = text.chars().find(|c| *c != '0' && *c != '1') {
            return Err(Error::Table(format!(
                "line {}: non-binary character '{bad}'",
                lineno + 1
            )));
        }
        match width {
            None => width = Some(text.len()),
            Some(w) if w != text.len() => {
                return Err(Error::Table(format!(
                    "line {}: width {} differs from {w}",
                    lineno + 1,
                    text.len()
                )))
            }
            _ => {}
        }
        if text.len() > 32 {
            return Err(Error::Table(format!("line {}: value wider than 32 bits", lineno + 1)));
        }
        table.push(usize::from_str_radix(text, 2).expect("validated binary"));
    }
    let lines = table.len();
    let n = match input_bits {
        Some(n) => {
            if lines != 1 << n {
                return Err(Error::Table(format!(
                    "expected {} lines for n={n}, got {lines}",
                    1usize << n
                )));
            }
            n
        }
        None => {
            if lines == 0 || !lines.is_power_of_two() {
                return Err(Error::Table(format!("line count {lines} is not a power of two")));
            }
            lines.trailing_zeros() as usize
        }
    };
    let w = width.unwrap_or(0);
    let m = match output_bits {
        Some(m) if m != w => return Err(Error::Table(format!("expected width m={m}, lines have width {w}"))),
        Some(m) => m,
        None => w,
    };
    ClassicalFunction::new(n, m, table)
}

pub fn load_function_table(
    path: impl AsRef<Path>,
    input_bits: Option<usize>,
    output_bits: Option<usize>,
) -> Result<ClassicalFunction> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_function_table(std::io::BufReader::new(file), input_bits, output_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, n: Option<usize>) -> Result<ClassicalFunction> {
        read_function_table(text.as_bytes(), n, None)
    }

    #[test]
    fn identity_on_one_bit() {
        let f = read("0\n1\n", None).unwrap();
        assert_eq!((f.input_bits(), f.output_bits()), (1, 1));
        assert_eq!(f.table(), &[0, 1]);
    }

    #[test]
    fn and_function_padded() {
        let f = read("00\n00\n00\n01\n", None).unwrap();
        assert_eq!((f.input_bits(), f.output_bits()), (2, 2));
        assert_eq!(f.table(), &[0, 0, 0, 1]);
    }

    #[test]
    fn wrong_line_count() {
        assert!(matches!(read("0\n1\n1\n", Some(2)), Err(Error::Table(_))));
        assert!(matches!(read("0\n1\n1\n", None), Err(Error::Table(_))));
    }

    #[test]
    fn non_binary_and_inconsistent_width() {
        assert!(matches!(read("0\n2\n", None), Err(Error::Table(_))));
        assert!(matches!(read("0\n10\n", None), Err(Error::Table(_))));
    }

    #[test]
    fn table_text_round_trip() {
        let f = ClassicalFunction::from_fn(3, 2, |x| x % 4).unwrap();
        let g = read(&f.to_table_text(), Some(3)).unwrap();
        assert_eq!(f, g);
    }
}
