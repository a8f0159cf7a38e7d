//! Sequence text loader: whitespace-separated base-10 symbols, or
//! contiguous `ACGT` letters (case-insensitive) with `--dna`.

use std::fmt;

use subshift_lcs::Symbol;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub source: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.source, self.line, self.column, self.message)
    }
}

pub fn dna_symbol(c: char) -> Option<Symbol> {
    match c.to_ascii_uppercase() {
        'A' => Some(0),
        'C' => Some(1),
        'G' => Some(2),
        'T' => Some(3),
        _ => None,
    }
}

pub fn dna_letter(s: Symbol) -> char {
    ['A', 'C', 'G', 'T'][s as usize]
}

pub fn parse_sequence(text: &str, dna: bool, source: &str) -> Result<Vec<Symbol>, ParseError> {
    let err = |line: usize, column: usize, message: String| ParseError {
        source: source.to_string(),
        line: line + 1,
        column: column + 1,
        message,
    };
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if dna {
            for (col, c) in line.chars().enumerate() {
                if c.is_whitespace() {
                    continue;
                }
                out.push(dna_symbol(c).ok_or_else(|| err(ln, col, format!("invalid DNA letter '{c}'")))?);
            }
        } else {
            let mut rest = line;
            let mut col = 0;
            while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
                let token_len = rest[start..].find(char::is_whitespace).unwrap_or(rest.len() - start);
                let token = &rest[start..start + token_len];
                let value = token
                    .parse::<Symbol>()
                    .map_err(|_| err(ln, col + rest[..start].chars().count(), format!("invalid symbol token '{token}'")))?;
                out.push(value);
                col += rest[..start + token_len].chars().count();
                rest = &rest[start + token_len..];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_dna() {
        assert_eq!(parse_sequence("0 1  2\n3\t10\n", false, "x").unwrap(), vec![0, 1, 2, 3, 10]);
        assert_eq!(parse_sequence("acGT\nTA\n", true, "x").unwrap(), vec![0, 1, 2, 3, 3, 0]);
    }

    #[test]
    fn reports_position_of_bad_token() {
        let e = parse_sequence("0 1\n2 x3 4\n", false, "f").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
        assert_eq!(e.to_string(), "f:2:3: invalid symbol token 'x3'");
        let e = parse_sequence("ACGN", true, "g").unwrap_err();
        assert_eq!((e.line, e.column), (1, 4));
        assert!(parse_sequence("-1", false, "h").is_err());
    }
}
