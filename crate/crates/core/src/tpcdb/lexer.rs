//! Error-tolerant C/C++ lexer for syntactic-feature extraction.
//!
//! Pulls string literals (escape-processed, adjacent literals
//! concatenated) and function definitions rendered as
//! `name(type1,type2,...)`. Comments and `#if 0` blocks contribute
//! nothing; unparseable stretches are skipped rather than failing.

use std::collections::BTreeSet;

/// Features lexed from one source file.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct SourceFeatures {
    pub strings: BTreeSet<String>,
    pub functions: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Str(String),
    Punct(char),
}

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "const",
    "volatile", "struct", "union", "enum", "bool", "size_t", "restrict",
];

const CONTROL_KEYWORDS: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "return", "sizeof", "case", "goto", "defined",
];

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    tokens: Vec<Token>,
    strings: BTreeSet<String>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            tokens: Vec::new(),
            strings: BTreeSet::new(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        Some(b)
    }

    fn skip_line_comment(&mut self) {
        while let Some(b) = self.bump() {
            if b == b'\n' {
                break;
            }
        }
    }

    fn skip_block_comment(&mut self) {
        while let Some(b) = self.bump() {
            if b == b'*' && self.peek() == Some(b'/') {
                self.pos += 1;
                return;
            }
        }
    }

    /// Consume a string literal body (opening quote already consumed),
    /// processing escapes.
    fn string_literal(&mut self) -> String {
        let mut out = String::new();
        while let Some(b) = self.bump() {
            match b {
                b'"' => break,
                b'\\' => {
                    let Some(esc) = self.bump() else { break };
                    match esc {
                        b'n' => out.push('\n'),
                        b't' => out.push('\t'),
                        b'r' => out.push('\r'),
                        b'0' => out.push('\0'),
                        b'\\' => out.push('\\'),
                        b'"' => out.push('"'),
                        b'\'' => out.push('\''),
                        b'x' => {
                            let mut v = 0u32;
                            let mut n = 0;
                            while n < 2 {
                                match self.peek().and_then(|c| (c as char).to_digit(16)) {
                                    Some(d) => {
                                        v = v * 16 + d;
                                        self.pos += 1;
                                        n += 1;
                                    }
                                    None => break,
                                }
                            }
                            if n > 0 {
                                out.push(char::from_u32(v).unwrap_or('\u{FFFD}'));
                            }
                        }
                        b'1'..=b'7' => {
                            let mut v = (esc - b'0') as u32;
                            let mut n = 1;
                            while n < 3 {
                                match self.peek() {
                                    Some(c @ b'0'..=b'7') => {
                                        v = v * 8 + (c - b'0') as u32;
                                        self.pos += 1;
                                        n += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(char::from_u32(v).unwrap_or('\u{FFFD}'));
                        }
                        b'\n' => {} // line continuation inside a literal
                        other => out.push(other as char),
                    }
                }
                b'\n' => break, // unterminated; tolerate
                other => out.push(other as char),
            }
        }
        out
    }

    fn char_literal(&mut self) {
        while let Some(b) = self.bump() {
            match b {
                b'\\' => {
                    self.bump();
                }
                b'\'' | b'\n' => break,
                _ => {}
            }
        }
    }

    fn ident(&mut self, first: u8) -> String {
        let mut s = String::new();
        s.push(first as char);
        while let Some(b) = self.peek() {
            if b == b'_' || b.is_ascii_alphanumeric() {
                s.push(b as char);
                self.pos += 1;
            } else {
                break;
            }
        }
        s
    }

    /// Read to end of logical line (honours backslash continuations),
    /// returning the raw text.
    fn directive_line(&mut self) -> String {
        let mut out = String::new();
        while let Some(b) = self.bump() {
            match b {
                b'\n' => {
                    if out.ends_with('\\') {
                        out.pop();
                        continue;
                    }
                    break;
                }
                b'/' if self.peek() == Some(b'/') => {
                    self.skip_line_comment();
                    break;
                }
                b'/' if self.peek() == Some(b'*') => {
                    self.pos += 1;
                    self.skip_block_comment();
                }
                other => out.push(other as char),
            }
        }
        out
    }

    /// Skip everything from an `#if 0` to its matching `#endif`,
    /// tracking nested conditionals.
    fn skip_disabled_block(&mut self) {
        let mut depth = 1usize;
        while self.pos < self.src.len() {
            // Find the next preprocessor line.
            let at_line_start = self.pos == 0 || self.src[self.pos - 1] == b'\n';
            if at_line_start {
                let rest = &self.src[self.pos..];
                let trimmed = rest
                    .iter()
                    .take_while(|&&b| b == b' ' || b == b'\t')
                    .count();
                if rest.get(trimmed) == Some(&b'#') {
                    self.pos += trimmed + 1;
                    let line = self.directive_line();
                    let word = line.split_whitespace().next().unwrap_or("");
                    match word {
                        "if" | "ifdef" | "ifndef" => depth += 1,
                        "endif" => {
                            depth -= 1;
                            if depth == 0 {
                                return;
                            }
                        }
                        _ => {}
                    }
                    continue;
                }
            }
            self.pos += 1;
        }
    }

    fn handle_directive(&mut self) {
        let line = self.directive_line();
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or("");
        match name {
            "if" => {
                let cond: String = parts.collect::<Vec<_>>().join(" ");
                if cond.trim() == "0" {
                    self.skip_disabled_block();
                }
            }
            "include" => {}
            _ => {
                // Macro bodies routinely carry user-visible literals;
                // harvest strings from the directive text.
                let mut sub = Lexer::new(&line);
                sub.run();
                self.strings.extend(sub.strings);
            }
        }
    }

    fn run(&mut self) {
        while let Some(b) = self.bump() {
            match b {
                b'/' if self.peek() == Some(b'/') => self.skip_line_comment(),
                b'/' if self.peek() == Some(b'*') => {
                    self.pos += 1;
                    self.skip_block_comment();
                }
                b'#' => {
                    let line_start = self.pos < 2
                        || self.src[..self.pos - 1]
                            .iter()
                            .rev()
                            .take_while(|&&c| c != b'\n')
                            .all(|&c| c == b' ' || c == b'\t');
                    if line_start {
                        self.handle_directive();
                    }
                }
                b'"' => {
                    let mut s = self.string_literal();
                    // Adjacent literal concatenation.
                    loop {
                        let saved = self.pos;
                        self.skip_trivia();
                        if self.peek() == Some(b'"') {
                            self.pos += 1;
                            s.push_str(&self.string_literal());
                        } else {
                            self.pos = saved;
                            break;
                        }
                    }
                    self.strings.insert(s.clone());
                    self.tokens.push(Token::Str(s));
                }
                b'\'' => self.char_literal(),
                b'_' => {
                    let id = self.ident(b'_');
                    self.tokens.push(Token::Ident(id));
                }
                c if c.is_ascii_alphabetic() => {
                    let id = self.ident(c);
                    self.tokens.push(Token::Ident(id));
                }
                c if c.is_ascii_whitespace() => {}
                c if c.is_ascii_digit() => {
                    // Numeric literal; consume potential suffixes/dots.
                    while let Some(n) = self.peek() {
                        if n.is_ascii_alphanumeric() || n == b'.' {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                c => self.tokens.push(Token::Punct(c as char)),
            }
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if (c as char).is_ascii_whitespace() => {
                    self.pos += 1;
                }
                Some(b'/') if self.peek2() == Some(b'/') => self.skip_line_comment(),
                Some(b'/') if self.peek2() == Some(b'*') => {
                    self.pos += 2;
                    self.skip_block_comment();
                }
                _ => return,
            }
        }
    }
}

fn normalize_param(tokens: &[String]) -> String {
    if tokens.is_empty() {
        return String::new();
    }
    let mut kept: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
    if kept.len() > 1 {
        let last = kept[kept.len() - 1];
        let is_ident = last
            .chars()
            .next()
            .map(|c| c.is_ascii_alphabetic() || c == '_')
            .unwrap_or(false);
        if is_ident && !TYPE_KEYWORDS.contains(&last) {
            kept.pop();
        }
    }
    let mut out = String::new();
    for t in kept {
        match t {
            "*" | "[]" => out.push_str(t),
            _ => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(t);
            }
        }
    }
    out
}

/// Detect file-scope function definitions in the token stream:
/// `ident ( params ) {`.
fn find_functions(tokens: &[Token]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut depth: i64 = 0;
    let mut i = 0usize;
    while i < tokens.len() {
        match &tokens[i] {
            Token::Punct('{') => {
                depth += 1;
                i += 1;
            }
            Token::Punct('}') => {
                depth -= 1;
                i += 1;
            }
            Token::Ident(name) if depth == 0 => {
                if CONTROL_KEYWORDS.contains(&name.as_str())
                    || TYPE_KEYWORDS.contains(&name.as_str())
                {
                    i += 1;
                    continue;
                }
                if tokens.get(i + 1) != Some(&Token::Punct('(')) {
                    i += 1;
                    continue;
                }
                // Collect tokens up to the matching close paren.
                let mut j = i + 2;
                let mut paren = 1i64;
                let mut params: Vec<Vec<String>> = vec![Vec::new()];
                let mut fnptr = false;
                while j < tokens.len() && paren > 0 {
                    match &tokens[j] {
                        Token::Punct('(') => {
                            paren += 1;
                            fnptr = true;
                        }
                        Token::Punct(')') => paren -= 1,
                        Token::Punct(',') if paren == 1 => params.push(Vec::new()),
                        Token::Punct('*') => params.last_mut().unwrap().push("*".into()),
                        Token::Punct('[') => {
                            // Swallow the array length (if any) plus ']'.
                            params.last_mut().unwrap().push("[]".into());
                            if tokens.get(j + 1) == Some(&Token::Punct(']')) {
                                j += 1;
                            } else if tokens.get(j + 2) == Some(&Token::Punct(']')) {
                                j += 2;
                            }
                        }
                        Token::Ident(t) => params.last_mut().unwrap().push(t.clone()),
                        _ => {}
                    }
                    j += 1;
                }
                if paren != 0 || tokens.get(j) != Some(&Token::Punct('{')) {
                    i += 1;
                    continue;
                }
                let rendered: Vec<String> = if fnptr {
                    // Function-pointer parameters defeat the simple
                    // renderer; degrade to arity only.
                    params.iter().map(|_| "?".to_string()).collect()
                } else {
                    params.iter().map(|p| normalize_param(p)).collect()
                };
                let rendered: Vec<String> = match rendered.as_slice() {
                    [only] if only == "void" || only.is_empty() => Vec::new(),
                    other => other.to_vec(),
                };
                out.insert(format!("{name}({})", rendered.join(",")));
                i = j; // resume at '{'
            }
            _ => i += 1,
        }
    }
    out
}

/// Extract string literals and function signatures from C/C++ source.
pub fn lex_source_features(source: &str) -> SourceFeatures {
    let mut lexer = Lexer::new(source);
    lexer.run();
    SourceFeatures {
        functions: find_functions(&lexer.tokens),
        strings: lexer.strings,
    }
}
