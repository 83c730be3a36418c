use std::collections::HashSet;
use std::path::Path;

use super::LoadError;

pub const BLANK_SYMBOL: &str = "<blank>";
pub const DELIMITER_SYMBOL: &str = "|";

/// Ordered CTC output units, including the blank and the word delimiter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    blank_index: usize,
    delimiter_index: usize,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>, blank_index: usize, delimiter_index: usize) -> Result<Self, LoadError> {
        if symbols.is_empty() {
            return Err(LoadError::EmptyVocabulary);
        }
        let mut seen = HashSet::with_capacity(symbols.len());
        for (index, symbol) in symbols.iter().enumerate() {
            if symbol.is_empty() {
                return Err(LoadError::EmptySymbol { index });
            }
            if !seen.insert(symbol.as_str()) {
                return Err(LoadError::DuplicateSymbol(symbol.clone()));
            }
        }
        if blank_index >= symbols.len() || delimiter_index >= symbols.len() {
            return Err(LoadError::InvalidSpecialIndex);
        }
        if blank_index == delimiter_index {
            return Err(LoadError::InvalidSpecialIndex);
        }
        Ok(Self {
            symbols,
            blank_index,
            delimiter_index,
        })
    }

    /// Builds a vocabulary from symbols, resolving `<blank>` and `|` by name.
    pub fn from_symbols<I, S>(symbols: I) -> Result<Self, LoadError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(LoadError::EmptyVocabulary);
        }
        let mut seen = HashSet::with_capacity(symbols.len());
        for symbol in &symbols {
            if !seen.insert(symbol.as_str()) {
                return Err(LoadError::DuplicateSymbol(symbol.clone()));
            }
        }
        let blank = symbols
            .iter()
            .position(|s| s == BLANK_SYMBOL)
            .ok_or(LoadError::MissingBlank)?;
        let delimiter = symbols
            .iter()
            .position(|s| s == DELIMITER_SYMBOL)
            .ok_or(LoadError::MissingDelimiter)?;
        Self::new(symbols, blank, delimiter)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        self.blank_index
    }

    pub fn delimiter_index(&self) -> usize {
        self.delimiter_index
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Renders a blank-free label sequence as text, with delimiters turned into spaces.
    pub fn render(&self, labels: &[usize]) -> String {
        let mut out = String::new();
        for &label in labels {
            if label == self.blank_index {
                continue;
            }
            if label == self.delimiter_index {
                if !out.is_empty() && !out.ends_with(' ') {
                    out.push(' ');
                }
            } else if let Some(symbol) = self.symbols.get(label) {
                out.push_str(symbol);
            }
        }
        out.trim_end().to_string()
    }
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_vocabulary(&text)
}

pub fn parse_vocabulary(text: &str) -> Result<Vocabulary, LoadError> {
    let symbols: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    // a trailing newline does not introduce an extra symbol
    let symbols: Vec<&str> = match symbols.iter().rposition(|s| !s.is_empty()) {
        Some(last) => symbols[..=last].to_vec(),
        None => return Err(LoadError::EmptyVocabulary),
    };
    if let Some(index) = symbols.iter().position(|s| s.is_empty()) {
        return Err(LoadError::EmptySymbol { index });
    }
    Vocabulary::from_symbols(symbols)
}
