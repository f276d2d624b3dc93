//! Tolerant scanner for the pseudo-JSON objects models emit. Accepts
//! single- or double-quoted keys and values, raw newlines inside strings,
//! and surrounding prose; reports whether single-quote normalization was
//! needed so callers can record the recovery.

/// Parsed value. Strings remember whether they were single-quoted.
#[derive(Clone, Debug, PartialEq)]
pub enum LooseValue {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Null,
    Array(Vec<LooseValue>),
    Object(Vec<(String, LooseValue)>),
}

impl LooseValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            LooseValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LooseObject {
    pub entries: Vec<(String, LooseValue)>,
    pub single_quoted: bool,
    /// Character span of the object within the scanned text.
    pub start: usize,
    pub end: usize,
}

impl LooseObject {
    pub fn get(&self, key: &str) -> Option<&LooseValue> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

const MAX_DEPTH: usize = 64;

struct Scanner<'a> {
    chars: &'a [char],
    pos: usize,
    single_quoted: bool,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    /// Whether a quote at the current lookahead position plausibly closes a
    /// string: the next non-space character must be structural.
    fn closes_string(&self, mut at: usize) -> bool {
        while let Some(c) = self.chars.get(at) {
            if c.is_whitespace() {
                at += 1;
            } else {
                return matches!(c, ',' | ':' | '}' | ']');
            }
        }
        true // end of input closes too
    }

    fn parse_string(&mut self, quote: char) -> Result<String, ()> {
        if quote == '\'' {
            self.single_quoted = true;
        }
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(()),
                Some('\\') => match self.bump() {
                    None => return Err(()),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some('b') => out.push('\u{8}'),
                    Some('f') => out.push('\u{c}'),
                    Some('u') => {
                        let mut code = 0u32;
                        let mut ok = true;
                        for _ in 0..4 {
                            match self.bump().and_then(|c| c.to_digit(16)) {
                                Some(d) => code = code * 16 + d,
                                None => {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                        match char::from_u32(code).filter(|_| ok) {
                            Some(c) => out.push(c),
                            None => out.push('\u{fffd}'),
                        }
                    }
                    Some(other) => out.push(other),
                },
                Some(c) if c == quote => {
                    // A double quote always terminates; a single quote only
                    // terminates ahead of a structural character, otherwise
                    // it is a literal apostrophe.
                    if quote == '"' || self.closes_string(self.pos) {
                        return Ok(out);
                    }
                    out.push(c);
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn parse_number(&mut self) -> Result<LooseValue, ()> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        let mut saw_digit = false;
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' => {
                    saw_digit = true;
                    self.pos += 1;
                }
                '.' | 'e' | 'E' | '+' | '-' if saw_digit => {
                    is_float = true;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        if !saw_digit {
            return Err(());
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if is_float {
            text.parse().map(LooseValue::Float).map_err(|_| ())
        } else {
            text.parse().map(LooseValue::Int).map_err(|_| ())
        }
    }

    fn parse_keyword(&mut self) -> Result<LooseValue, ()> {
        for (word, value) in [
            ("true", LooseValue::Bool(true)),
            ("false", LooseValue::Bool(false)),
            ("null", LooseValue::Null),
            ("None", LooseValue::Null),
        ] {
            let end = self.pos + word.len();
            if end <= self.chars.len() && self.chars[self.pos..end].iter().collect::<String>() == word {
                self.pos = end;
                return Ok(value);
            }
        }
        Err(())
    }

    fn parse_value(&mut self, depth: usize) -> Result<LooseValue, ()> {
        if depth > MAX_DEPTH {
            return Err(());
        }
        self.skip_ws();
        match self.peek() {
            Some('{') => self.parse_object(depth + 1).map(LooseValue::Object),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(']') => {
                            self.pos += 1;
                            return Ok(LooseValue::Array(items));
                        }
                        None => return Err(()),
                        _ => {
                            items.push(self.parse_value(depth + 1)?);
                            self.skip_ws();
                            match self.peek() {
                                Some(',') => {
                                    self.pos += 1;
                                }
                                Some(']') => {}
                                _ => return Err(()),
                            }
                        }
                    }
                }
            }
            Some(q @ ('"' | '\'')) => {
                self.pos += 1;
                self.parse_string(q).map(LooseValue::Str)
            }
            Some(c) if c == '-' || c.is_ascii_digit() => self.parse_number(),
            Some(_) => self.parse_keyword(),
            None => Err(()),
        }
    }

    fn parse_object(&mut self, depth: usize) -> Result<Vec<(String, LooseValue)>, ()> {
        if depth > MAX_DEPTH || self.bump() != Some('{') {
            return Err(());
        }
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') => {
                    self.pos += 1;
                    return Ok(entries);
                }
                Some(q @ ('"' | '\'')) => {
                    self.pos += 1;
                    let key = self.parse_string(q)?;
                    self.skip_ws();
                    if self.bump() != Some(':') {
                        return Err(());
                    }
                    let value = self.parse_value(depth)?;
                    entries.push((key, value));
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => {
                            self.pos += 1;
                        }
                        Some('}') => {}
                        _ => return Err(()),
                    }
                }
                _ => return Err(()),
            }
        }
    }
}

/// Parse the balanced object starting at character offset `start` (which
/// must point at a `{`). Returns the object and its end offset.
fn parse_object_at(chars: &[char], start: usize) -> Option<LooseObject> {
    let mut scanner = Scanner {
        chars,
        pos: start,
        single_quoted: false,
    };
    let entries = scanner.parse_object(0).ok()?;
    Some(LooseObject {
        entries,
        single_quoted: scanner.single_quoted,
        start,
        end: scanner.pos,
    })
}

/// Find the first parseable object in `text` that carries every key in
/// `keys`. Objects missing a key are skipped, as is any surrounding prose.
pub fn first_object_with_keys(text: &str, keys: &[&str]) -> Option<LooseObject> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '{' {
            if let Some(obj) = parse_object_at(&chars, i) {
                if keys.iter().all(|k| obj.get(k).is_some()) {
                    return Some(obj);
                }
                // A well-formed object without the keys is skipped whole.
                i = obj.end;
                continue;
            }
        }
        i += 1;
    }
    None
}

/// Character count of `text` (spans from this module index by chars).
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}
