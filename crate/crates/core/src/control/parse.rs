use std::collections::HashSet;

use super::{ControlError, ControllerProgram, Source, StateDecl, Transition, Trigger};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ControlError {
    ControlError::Syntax { line, column, message: message.into() }
}

fn lex(line: &str, line_no: usize) -> Result<Vec<Token>, ControlError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '#' => break,
            '(' => {
                out.push(Token { tok: Tok::LParen, col });
                i += 1;
            }
            ')' => {
                out.push(Token { tok: Tok::RParen, col });
                i += 1;
            }
            ',' => {
                out.push(Token { tok: Tok::Comma, col });
                i += 1;
            }
            '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&c| c == '"')
                    .ok_or_else(|| syntax(line_no, col, "unterminated string"))?;
                out.push(Token { tok: Tok::Str(chars[i + 1..i + 1 + end].iter().collect()), col });
                i += end + 2;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '.' | '-' | '+' | 'e' | 'E')) {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| syntax(line_no, col, format!("invalid number {text:?}")))?;
                out.push(Token { tok: Tok::Num(v), col });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Word(chars[start..i].iter().collect()), col });
            }
            other => return Err(syntax(line_no, col, format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    line_len: usize,
}

impl Cursor {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.line_len + 1, |t| t.col)
    }

    fn err(&self, message: impl Into<String>) -> ControlError {
        syntax(self.line, self.col(), message)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ControlError> {
        match self.peek() {
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected '{kw}'"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ControlError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ControlError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn punct(&mut self, tok: Tok, what: &str) -> Result<(), ControlError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{what}'")))
        }
    }

    fn end(&self) -> Result<(), ControlError> {
        if self.pos < self.toks.len() {
            Err(self.err("expected end of line"))
        } else {
            Ok(())
        }
    }
}

/// Parses controller text and checks that every referenced state exists.
pub fn parse_controller(text: &str) -> Result<ControllerProgram, ControlError> {
    let mut states: Vec<StateDecl> = Vec::new();
    let mut names = HashSet::new();
    let mut initial: Option<String> = None;
    let mut transitions = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim_start().starts_with("```") {
            continue;
        }
        let toks = lex(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks, pos: 0, line: line_no, line_len: raw.chars().count() };
        let head = c.ident("a statement")?;
        match head.to_ascii_lowercase().as_str() {
            "state" => {
                let name = state_name(&mut c)?;
                c.keyword("plays")?;
                let clip = match c.next() {
                    Some(Tok::Str(s)) if !s.is_empty() => s,
                    _ => {
                        c.pos -= 1;
                        return Err(c.err("expected a quoted clip name"));
                    }
                };
                let looping = matches!(c.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case("loop"));
                if looping {
                    c.pos += 1;
                }
                c.end()?;
                if !names.insert(name.clone()) {
                    return Err(ControlError::DuplicateState(name));
                }
                states.push(StateDecl { name, clip, looping });
            }
            "initial" => {
                let name = state_name(&mut c)?;
                c.end()?;
                if initial.is_some() {
                    return Err(ControlError::MultipleInitialStates(line_no));
                }
                initial = Some(name);
            }
            "on" => transitions.push(transition(&mut c)?),
            _ => {
                c.pos = 0;
                return Err(c.err("expected 'state', 'initial' or 'on'"));
            }
        }
    }

    let initial_state = initial.ok_or(ControlError::NoInitialState)?;
    let known = |s: &str| names.contains(s);
    if !known(&initial_state) {
        return Err(ControlError::UnknownState(initial_state));
    }
    for t in &transitions {
        if let Source::State(s) = &t.from {
            if !known(s) {
                return Err(ControlError::UnknownState(s.clone()));
            }
        }
        if !known(&t.to) {
            return Err(ControlError::UnknownState(t.to.clone()));
        }
    }
    Ok(ControllerProgram { states, initial_state, transitions })
}

fn state_name(c: &mut Cursor) -> Result<String, ControlError> {
    let name = c.ident("a state name")?;
    if name == "ANY" {
        c.pos -= 1;
        return Err(c.err("'ANY' is reserved"));
    }
    Ok(name)
}

fn transition(c: &mut Cursor) -> Result<Transition, ControlError> {
    let trigger = trigger(c)?;
    let src_kw = c.ident("'from' or 'in'")?;
    if !src_kw.eq_ignore_ascii_case("from") && !src_kw.eq_ignore_ascii_case("in") {
        c.pos -= 1;
        return Err(c.err("expected 'from' or 'in'"));
    }
    let src = c.ident("a state name or ANY")?;
    let from = if src == "ANY" { Source::Any } else { Source::State(src) };
    c.keyword("goto")?;
    let to = state_name(c)?;
    c.keyword("fade")?;
    let fade_col = c.col();
    let fade = c.number("a fade duration")?;
    if fade < 0.0 {
        return Err(syntax(c.line, fade_col, "fade must not be negative"));
    }
    c.end()?;
    Ok(Transition { from, to, trigger, fade })
}

fn trigger(c: &mut Cursor) -> Result<Trigger, ControlError> {
    let kind = c.ident("a trigger")?;
    c.punct(Tok::LParen, "(")?;
    let trig = match kind.to_ascii_lowercase().as_str() {
        "key" => {
            let name = match c.next() {
                Some(Tok::Word(w)) => w,
                Some(Tok::Num(n)) => format!("{n}"),
                _ => {
                    c.pos -= 1;
                    return Err(c.err("expected a key name"));
                }
            };
            Trigger::Key { name }
        }
        "timer" => {
            let col = c.col();
            let seconds = c.number("seconds")?;
            if seconds <= 0.0 {
                return Err(syntax(c.line, col, "timer seconds must be positive"));
            }
            Trigger::Timer { seconds }
        }
        "random" => {
            let col = c.col();
            let probability = c.number("a probability")?;
            if !(0.0..=1.0).contains(&probability) {
                return Err(syntax(c.line, col, "probability must lie in [0, 1]"));
            }
            c.punct(Tok::Comma, ",")?;
            let col = c.col();
            let interval = c.number("a check interval")?;
            if interval <= 0.0 {
                return Err(syntax(c.line, col, "check interval must be positive"));
            }
            Trigger::Random { probability, interval }
        }
        _ => {
            c.pos -= 2;
            return Err(c.err("expected key(...), timer(...) or random(...)"));
        }
    };
    c.punct(Tok::RParen, ")")?;
    Ok(trig)
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDLE_WALK: &str = "state idle plays \"Idle\" loop\nstate walk plays \"Walking\" loop\ninitial idle\non key(space) from idle goto walk fade 0.25";

    #[test]
    fn parses_idle_walk() {
        let p = parse_controller(IDLE_WALK).unwrap();
        assert_eq!(p.states.len(), 2);
        assert_eq!(p.initial_state, "idle");
        assert_eq!(
            p.transitions,
            vec![Transition {
                from: Source::State("idle".into()),
                to: "walk".into(),
                trigger: Trigger::Key { name: "space".into() },
                fade: 0.25,
            }]
        );
        assert_eq!(parse_controller(&p.to_dsl()).unwrap(), p);
    }

    #[test]
    fn unknown_target() {
        let text = format!("{IDLE_WALK}\non key(r) from walk goto run fade 0.1");
        assert_eq!(parse_controller(&text), Err(ControlError::UnknownState("run".into())));
    }

    #[test]
    fn empty_has_no_initial() {
        assert_eq!(parse_controller(""), Err(ControlError::NoInitialState));
        assert_eq!(parse_controller("# nothing\n\n"), Err(ControlError::NoInitialState));
    }

    #[test]
    fn duplicates_and_reserved() {
        let dup = "state a plays \"A\"\nstate a plays \"B\"\ninitial a";
        assert_eq!(parse_controller(dup), Err(ControlError::DuplicateState("a".into())));
        assert_eq!(parse_controller("state a plays \"A\"\ninitial a\ninitial a").unwrap_err().code(), "MultipleInitialStates");
        assert_eq!(parse_controller("state ANY plays \"A\"").unwrap_err().code(), "SyntaxError");
    }

    #[test]
    fn trigger_forms() {
        let text = "state a plays \"A\"\nstate b plays \"B\"\ninitial a\n\
                    on timer(3) in a goto b fade 0\n\
                    on random(0.5, 0.25) from ANY goto a fade 0.1 # back\n";
        let p = parse_controller(text).unwrap();
        assert_eq!(p.transitions[0].trigger, Trigger::Timer { seconds: 3.0 });
        assert_eq!(p.transitions[1].from, Source::Any);
        assert_eq!(p.transitions[1].trigger, Trigger::Random { probability: 0.5, interval: 0.25 });
    }

    #[test]
    fn syntax_positions() {
        let e = parse_controller("state a plays A").unwrap_err();
        assert_eq!(e, ControlError::Syntax { line: 1, column: 15, message: "expected a quoted clip name".into() });
        let e = parse_controller("state a plays \"A\"\ninitial a\non random(1.5, 1) from a goto a fade 0").unwrap_err();
        assert!(matches!(e, ControlError::Syntax { line: 3, column: 11, .. }), "{e:?}");
        let e = parse_controller("state a plays \"A\"\ninitial a\non timer(1) from a goto a fade -1").unwrap_err();
        assert!(matches!(e, ControlError::Syntax { line: 3, .. }));
        let e = parse_controller("jump a").unwrap_err();
        assert!(matches!(e, ControlError::Syntax { line: 1, column: 1, .. }));
    }
}
