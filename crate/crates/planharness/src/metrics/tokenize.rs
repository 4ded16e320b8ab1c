//! Lexer-level code tokenizer for match-based scoring.
//!
//! Emits identifiers, keywords, literals, and operators; comments, blank
//! lines, and indentation are dropped. The token *sequence* round-trips
//! through `detokenize`, whitespace does not.

/// Tokenize Python-style source into lexer-level tokens.
pub fn tokenize(source: &str) -> Vec<String> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        // string literal, with optional prefix letters (r, b, f, u, rb, …)
        if is_string_start(&chars, i) {
            let (token, next) = scan_string(&chars, i);
            tokens.push(token);
            i = next;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let (token, next) = scan_number(&chars, i);
            tokens.push(token);
            i = next;
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
            continue;
        }
        let (op, next) = scan_operator(&chars, i);
        tokens.push(op);
        i = next;
    }
    tokens
}

/// Inverse presentation of a token stream; preserves tokens, not layout.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}

fn is_string_start(chars: &[char], i: usize) -> bool {
    let c = chars[i];
    if c == '"' || c == '\'' {
        return true;
    }
    // prefix of 1–2 letters directly before a quote, e.g. r"", rb'', f""
    if c.is_ascii_alphabetic() {
        let mut j = i;
        while j < chars.len() && j - i < 2 && chars[j].is_ascii_alphabetic() {
            if !matches!(
                chars[j].to_ascii_lowercase(),
                'r' | 'b' | 'f' | 'u'
            ) {
                return false;
            }
            j += 1;
        }
        return j < chars.len() && (chars[j] == '"' || chars[j] == '\'');
    }
    false
}

fn scan_string(chars: &[char], start: usize) -> (String, usize) {
    let mut i = start;
    while chars[i] != '"' && chars[i] != '\'' {
        i += 1;
    }
    let quote = chars[i];
    let triple = chars.get(i + 1) == Some(&quote) && chars.get(i + 2) == Some(&quote);
    let mut j = if triple { i + 3 } else { i + 1 };
    while j < chars.len() {
        if chars[j] == '\\' {
            j += 2;
            continue;
        }
        if chars[j] == quote {
            if !triple {
                j += 1;
                break;
            }
            if chars.get(j + 1) == Some(&quote) && chars.get(j + 2) == Some(&quote) {
                j += 3;
                break;
            }
        }
        j += 1;
    }
    (chars[start..j.min(chars.len())].iter().collect(), j)
}

fn scan_number(chars: &[char], start: usize) -> (String, usize) {
    let mut i = start;
    while i < chars.len()
        && (chars[i].is_ascii_alphanumeric()
            || chars[i] == '.'
            || chars[i] == '_'
            || ((chars[i] == '+' || chars[i] == '-')
                && matches!(chars.get(i.wrapping_sub(1)), Some('e') | Some('E'))))
    {
        i += 1;
    }
    (chars[start..i].iter().collect(), i)
}

const OPERATORS_3: &[&str] = &["**=", "//=", ">>=", "<<=", "...", "!=="];
const OPERATORS_2: &[&str] = &[
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=",
];

fn scan_operator(chars: &[char], i: usize) -> (String, usize) {
    for len in [3usize, 2] {
        if i + len <= chars.len() {
            let slice: String = chars[i..i + len].iter().collect();
            let table: &[&str] = if len == 3 { OPERATORS_3 } else { OPERATORS_2 };
            if table.contains(&slice.as_str()) {
                return (slice, i + len);
            }
        }
    }
    (chars[i].to_string(), i + 1)
}
