//! Compiling Turing machines to temporal rule programs.
//!
//! A word `w` of length ≥ 2 is encoded as a structure at time 0: elements
//! `1..=|w|`, a successor chain `Tape`, markers `Begin`/`End`, and one
//! unary letter fact per position. The compiled program derives `Accept`
//! exactly when the structure is *spurious* (it fails to encode a word) or
//! the machine accepts the encoded word. Because spuriousness can only be
//! caused by extra facts and acceptance is preserved under extensions, the
//! derived `Accept` is monotone in the input even for machines whose
//! language is wildly non-monotone.
//!
//! The machine tape is unbounded to the right; the encoding is not. When
//! the simulated head walks off `End`, the program *stalls*: the head
//! stays put for one step while an inductive rule mints a fresh cell whose
//! name is the next timestamp (entanglement) and links it via `TapeExt`.

use crate::data::Fact;
use crate::dedalus::core::{
    eval_dedalus, parse_dedalus, DedalusProgram, TemporalInstance,
};
use crate::dedalus::DedalusError;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Move {
    Left,
    Right,
}

/// A deterministic single-tape machine, one-way infinite to the right.
/// Moving left on the leftmost cell leaves the head in place. Accepting
/// states are terminal.
#[derive(Clone, Debug)]
pub struct TuringMachine {
    pub states: BTreeSet<String>,
    pub input_alphabet: BTreeSet<char>,
    pub tape_alphabet: BTreeSet<char>,
    pub blank: char,
    pub transitions: BTreeMap<(String, char), (String, char, Move)>,
    pub start: String,
    pub accepting: BTreeSet<String>,
}

impl TuringMachine {
    fn validate(&self) -> Result<(), DedalusError> {
        let bad = |msg: String| Err(DedalusError::BadMachine(msg));
        if !self.states.contains(&self.start) {
            return bad(format!("unknown start state `{}`", self.start));
        }
        for q in &self.accepting {
            if !self.states.contains(q) {
                return bad(format!("unknown accepting state `{q}`"));
            }
        }
        if !self.tape_alphabet.contains(&self.blank) {
            return bad("the blank must be in the tape alphabet".to_string());
        }
        if self.input_alphabet.contains(&self.blank) {
            return bad("the blank may not be an input letter".to_string());
        }
        if !self.input_alphabet.is_subset(&self.tape_alphabet) {
            return bad("the input alphabet must be part of the tape alphabet".to_string());
        }
        for c in &self.tape_alphabet {
            if !(c.is_ascii_alphabetic() || *c == self.blank) {
                return bad(format!("tape letter `{c}` is not an ascii letter"));
            }
        }
        for ((q, c), (q2, w, _)) in &self.transitions {
            if !self.states.contains(q) || !self.states.contains(q2) {
                return bad(format!("transition on unknown state `{q}`/`{q2}`"));
            }
            if !self.tape_alphabet.contains(c) || !self.tape_alphabet.contains(w) {
                return bad(format!("transition on unknown letter `{c}`/`{w}`"));
            }
            if self.accepting.contains(q) {
                return bad(format!("accepting state `{q}` must be terminal"));
            }
        }
        Ok(())
    }

    fn letter_name(&self, c: char) -> String {
        if c == self.blank {
            "blank".to_string()
        } else {
            c.to_string()
        }
    }
}

/// Run the machine directly on a word. Returns whether it accepts within
/// `max_steps` steps; running off the budget counts as rejection.
pub fn run_machine(tm: &TuringMachine, word: &str, max_steps: usize) -> bool {
    let mut tape: Vec<char> = word.chars().collect();
    if tape.is_empty() {
        tape.push(tm.blank);
    }
    let mut pos = 0usize;
    let mut state = tm.start.clone();
    for _ in 0..max_steps {
        if tm.accepting.contains(&state) {
            return true;
        }
        let Some((q2, w, mv)) = tm.transitions.get(&(state.clone(), tape[pos])) else {
            return false;
        };
        tape[pos] = *w;
        state = q2.clone();
        match mv {
            Move::Right => {
                pos += 1;
                if pos == tape.len() {
                    tape.push(tm.blank);
                }
            }
            Move::Left => pos = pos.saturating_sub(1),
        }
    }
    false
}

/// Parse the line-based machine format:
///
/// ```text
/// states q0 q1 qa
/// input a b
/// tape a b _
/// blank _
/// start q0
/// accept qa
/// delta q0 a -> q1 a R
/// ```
pub fn parse_machine(text: &str) -> Result<TuringMachine, DedalusError> {
    let bad = |msg: String| DedalusError::BadMachine(msg);
    let one_char = |tok: &str| -> Result<char, DedalusError> {
        let mut it = tok.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => Ok(c),
            _ => Err(bad(format!("`{tok}` is not a single letter"))),
        }
    };
    let mut states = BTreeSet::new();
    let mut input_alphabet = BTreeSet::new();
    let mut tape_alphabet = BTreeSet::new();
    let mut blank = None;
    let mut start = None;
    let mut accepting = BTreeSet::new();
    let mut transitions = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "states" => states.extend(toks[1..].iter().map(|s| s.to_string())),
            "input" => {
                for t in &toks[1..] {
                    input_alphabet.insert(one_char(t)?);
                }
            }
            "tape" => {
                for t in &toks[1..] {
                    tape_alphabet.insert(one_char(t)?);
                }
            }
            "blank" => match toks[1..] {
                [t] => blank = Some(one_char(t)?),
                _ => return Err(bad("`blank` takes one letter".to_string())),
            },
            "start" => match toks[1..] {
                [t] => start = Some(t.to_string()),
                _ => return Err(bad("`start` takes one state".to_string())),
            },
            "accept" => accepting.extend(toks[1..].iter().map(|s| s.to_string())),
            "delta" => {
                let [q, c, arrow, q2, w, mv] = toks[1..] else {
                    return Err(bad(format!("malformed transition `{line}`")));
                };
                if arrow != "->" {
                    return Err(bad(format!("malformed transition `{line}`")));
                }
                let mv = match mv {
                    "L" => Move::Left,
                    "R" => Move::Right,
                    other => return Err(bad(format!("unknown move `{other}`"))),
                };
                let key = (q.to_string(), one_char(c)?);
                if transitions.contains_key(&key) {
                    return Err(bad(format!("duplicate transition for `{q}` on `{c}`")));
                }
                transitions.insert(key, (q2.to_string(), one_char(w)?, mv));
            }
            other => return Err(bad(format!("unknown directive `{other}`"))),
        }
    }
    let tm = TuringMachine {
        states,
        input_alphabet,
        tape_alphabet,
        blank: blank.ok_or_else(|| bad("missing `blank`".to_string()))?,
        transitions,
        start: start.ok_or_else(|| bad("missing `start`".to_string()))?,
        accepting,
    };
    tm.validate()?;
    Ok(tm)
}

/// The time-0 structure encoding `word` (length ≥ 2): positions `1..=n`
/// chained by `Tape`, `Begin`/`End` markers, one letter fact per position.
/// Shorter strings still produce a structure, but it reads as spurious.
pub fn word_structure(word: &str) -> TemporalInstance {
    let mut out = TemporalInstance::new();
    let n = word.chars().count();
    for (i, c) in word.chars().enumerate() {
        let p = (i + 1).to_string();
        out.insert(Fact::new(&c.to_string(), &[&p]), 0);
        if i + 2 <= n {
            out.insert(Fact::new("Tape", &[&p, &(i + 2).to_string()]), 0);
        }
    }
    if n > 0 {
        out.insert(Fact::new("Begin", &["1"]), 0);
        out.insert(Fact::new("End", &[&n.to_string()]), 0);
    }
    out
}

const RESERVED: &[&str] = &[
    "Tape", "TapeExt", "Begin", "End", "Labeled", "PathL", "Word", "Spur", "OnTape",
    "ReachB", "Elem", "Head", "HeadExt", "ExtNext", "Accept", "Started", "Neq",
];

/// Compile the machine into a temporal program over word structures.
pub fn build_tm_program(tm: &TuringMachine) -> Result<DedalusProgram, DedalusError> {
    tm.validate()?;
    let bad = |msg: String| Err(DedalusError::BadMachine(msg));
    let is_ident = |s: &str| {
        let mut it = s.chars();
        matches!(it.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && it.all(|c| c.is_ascii_alphanumeric() || c == '_')
    };

    // Every generated predicate name must be fresh.
    let mut names: BTreeSet<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    let mut fresh = |n: String| -> Result<String, DedalusError> {
        if !is_ident(&n) {
            return Err(DedalusError::BadMachine(format!(
                "`{n}` is not a usable predicate name"
            )));
        }
        if !names.insert(n.clone()) {
            return Err(DedalusError::BadMachine(format!(
                "predicate name `{n}` is claimed twice"
            )));
        }
        Ok(n)
    };
    for c in &tm.input_alphabet {
        fresh(tm.letter_name(*c))?;
    }
    for c in &tm.tape_alphabet {
        fresh(format!("{}_sim", tm.letter_name(*c)))?;
        fresh(format!("{}_ext", tm.letter_name(*c)))?;
    }
    for q in &tm.states {
        fresh(q.clone())?;
        fresh(format!("{q}_ext"))?;
    }
    if tm.input_alphabet.is_empty() {
        return bad("the input alphabet is empty".to_string());
    }

    let mut src = String::new();
    let mut rule = |s: String| {
        let _ = writeln!(src, "{s}");
    };

    // Structure persistence.
    rule("Tape(x, y, T+1) :- Tape(x, y, T).".into());
    rule("Begin(x, T+1) :- Begin(x, T).".into());
    rule("End(x, T+1) :- End(x, T).".into());
    for c in &tm.input_alphabet {
        let n = tm.letter_name(*c);
        rule(format!("{n}(x, T+1) :- {n}(x, T)."));
    }

    // Word detection: a labeled chain from Begin to End.
    for c in &tm.input_alphabet {
        rule(format!("Labeled(x, T) :- {}(x, T).", tm.letter_name(*c)));
    }
    rule("PathL(x, T) :- Begin(x, T), Labeled(x, T).".into());
    rule("PathL(y, T) :- PathL(x, T), Tape(x, y, T), Labeled(y, T).".into());
    rule("Word(T) :- PathL(x, T), End(x, T).".into());

    // Spuriousness. Duplicated markers:
    rule("Spur(T) :- Begin(x, T), Begin(y, T), Neq(x, y).".into());
    rule("Spur(T) :- End(x, T), End(y, T), Neq(x, y).".into());
    // Conflicting letters on one position:
    let letters: Vec<String> = tm.input_alphabet.iter().map(|c| tm.letter_name(*c)).collect();
    for (i, a) in letters.iter().enumerate() {
        for b in &letters[i + 1..] {
            rule(format!("Spur(T) :- {a}(x, T), {b}(x, T)."));
        }
    }
    // The chain must be a simple path rooted at Begin:
    rule("Spur(T) :- Tape(x, y, T), Tape(x, z, T), Neq(y, z).".into());
    rule("Spur(T) :- Tape(x, z, T), Tape(y, z, T), Neq(x, y).".into());
    rule("OnTape(x, T) :- Tape(x, y, T).".into());
    rule("OnTape(y, T) :- Tape(x, y, T).".into());
    rule("ReachB(x, T) :- Begin(x, T).".into());
    rule("ReachB(y, T) :- ReachB(x, T), Tape(x, y, T).".into());
    rule("Spur(T) :- OnTape(x, T), not ReachB(x, T).".into());
    // Phantom or unlabeled elements:
    rule("Elem(x, T) :- OnTape(x, T).".into());
    rule("Elem(x, T) :- Begin(x, T).".into());
    rule("Elem(x, T) :- End(x, T).".into());
    for n in &letters {
        rule(format!("Elem(x, T) :- {n}(x, T)."));
    }
    rule("Spur(T) :- Elem(x, T), not Labeled(x, T).".into());
    rule("Spur(T) :- Elem(x, T), not OnTape(x, T).".into());

    // Head bookkeeping.
    for q in &tm.states {
        rule(format!("Head(x, T) :- {q}(x, T)."));
        rule(format!("HeadExt(x, T) :- {q}_ext(x, T)."));
    }
    rule("ExtNext(x, T) :- TapeExt(x, y, T).".into());

    // Acceptance.
    rule("Accept(T) :- Spur(T).".into());
    for q in &tm.accepting {
        rule(format!("Accept(T) :- {q}(x, T)."));
        rule(format!("Accept(T) :- {q}_ext(x, T)."));
    }
    rule("Accept(T+1) :- Accept(T).".into());

    // Launch the simulation once, on a clean word.
    let guard = "Word(T), not Spur(T), not Started(T)";
    rule(format!("{}(x, T+1) :- {guard}, Begin(x, T).", tm.start));
    for c in &tm.input_alphabet {
        let n = tm.letter_name(*c);
        rule(format!("{n}_sim(x, T+1) :- {guard}, {n}(x, T)."));
    }
    rule("Started(T+1) :- Word(T).".into());
    rule("Started(T+1) :- Started(T).".into());

    // Simulated tape contents persist except under the head, where the
    // transition rules write the replacement.
    for c in &tm.tape_alphabet {
        let n = tm.letter_name(*c);
        rule(format!("{n}_sim(y, T+1) :- {n}_sim(y, T), not Head(y, T)."));
        rule(format!("{n}_ext(y, T+1) :- {n}_ext(y, T), not HeadExt(y, T)."));
    }
    rule("TapeExt(x, y, T+1) :- TapeExt(x, y, T).".into());

    let blank = tm.letter_name(tm.blank);
    for ((q, c), (q2, w, mv)) in &tm.transitions {
        let cs = format!("{}_sim", tm.letter_name(*c));
        let ce = format!("{}_ext", tm.letter_name(*c));
        let ws = format!("{}_sim", tm.letter_name(*w));
        let we = format!("{}_ext", tm.letter_name(*w));
        match mv {
            Move::Right => {
                // Interior of the encoded word.
                let body = format!("{q}(x, T), {cs}(x, T), Tape(x, y, T)");
                rule(format!("{q2}(y, T+1) :- {body}."));
                rule(format!("{ws}(x, T+1) :- {body}."));
                // Off the right end, onto an already-minted cell.
                let body = format!("{q}(x, T), {cs}(x, T), End(x, T), TapeExt(x, y, T)");
                rule(format!("{q2}_ext(y, T+1) :- {body}."));
                rule(format!("{ws}(x, T+1) :- {body}."));
                // Off the right end with no cell yet: stall and mint one,
                // named by the timestamp it appears at.
                let body = format!("{q}(x, T), {cs}(x, T), End(x, T), not ExtNext(x, T)");
                rule(format!("{q}(x, T+1) :- {body}."));
                rule(format!("{cs}(x, T+1) :- {body}."));
                rule(format!("TapeExt(x, T+1, T+1) :- {body}."));
                rule(format!("{blank}_ext(T+1, T+1) :- {body}."));
                // Same two cases within the extension.
                let body = format!("{q}_ext(x, T), {ce}(x, T), TapeExt(x, y, T)");
                rule(format!("{q2}_ext(y, T+1) :- {body}."));
                rule(format!("{we}(x, T+1) :- {body}."));
                let body = format!("{q}_ext(x, T), {ce}(x, T), not ExtNext(x, T)");
                rule(format!("{q}_ext(x, T+1) :- {body}."));
                rule(format!("{ce}(x, T+1) :- {body}."));
                rule(format!("TapeExt(x, T+1, T+1) :- {body}."));
                rule(format!("{blank}_ext(T+1, T+1) :- {body}."));
            }
            Move::Left => {
                let body = format!("{q}(x, T), {cs}(x, T), Tape(y, x, T)");
                rule(format!("{q2}(y, T+1) :- {body}."));
                rule(format!("{ws}(x, T+1) :- {body}."));
                // At the leftmost cell the head stays put.
                let body = format!("{q}(x, T), {cs}(x, T), Begin(x, T)");
                rule(format!("{q2}(x, T+1) :- {body}."));
                rule(format!("{ws}(x, T+1) :- {body}."));
                // Back from the extension onto the encoded word.
                let body = format!("{q}_ext(x, T), {ce}(x, T), TapeExt(y, x, T), End(y, T)");
                rule(format!("{q2}(y, T+1) :- {body}."));
                rule(format!("{we}(x, T+1) :- {body}."));
                let body =
                    format!("{q}_ext(x, T), {ce}(x, T), TapeExt(y, x, T), not End(y, T)");
                rule(format!("{q2}_ext(y, T+1) :- {body}."));
                rule(format!("{we}(x, T+1) :- {body}."));
            }
        }
    }

    parse_dedalus(&src)
}

/// Whether the compiled program derives `Accept` on `input` within
/// `horizon` steps.
pub fn derives_accept(
    program: &DedalusProgram,
    input: &TemporalInstance,
    horizon: u64,
) -> bool {
    eval_dedalus(program, input, horizon)
        .flatten()
        .iter()
        .any(|f| &*f.relation == "Accept")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedalus::core::check_eventual_consistency;

    /// Accepts exactly the words over {a, b} containing "ab".
    const CONTAINS_AB: &str = "
        states q0 q1 qa qr
        input a b
        tape a b _
        blank _
        start q0
        accept qa
        delta q0 a -> q1 a R
        delta q0 b -> q0 b R
        delta q1 a -> q1 a R
        delta q1 b -> qa b R
        delta q0 _ -> qr _ L
        delta q1 _ -> qr _ L
    ";

    fn words(len: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        for _ in 0..len {
            out = out
                .iter()
                .flat_map(|w| ["a", "b"].iter().map(move |c| format!("{w}{c}")))
                .collect();
        }
        out
    }

    #[test]
    fn direct_interpreter_matches_the_language() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        for len in 0..=6 {
            for w in words(len) {
                assert_eq!(run_machine(&tm, &w, 1000), w.contains("ab"), "word {w:?}");
            }
        }
    }

    #[test]
    fn compiled_program_agrees_with_machine_and_language() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        let p = build_tm_program(&tm).unwrap();
        for len in 2..=5 {
            for w in words(len) {
                let got = derives_accept(&p, &word_structure(&w), 40);
                assert_eq!(got, run_machine(&tm, &w, 1000), "word {w:?}");
                assert_eq!(got, w.contains("ab"), "word {w:?}");
            }
        }
    }

    #[test]
    fn accepts_a_length_six_word() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        let p = build_tm_program(&tm).unwrap();
        assert!(derives_accept(&p, &word_structure("bbabba"), 40));
        assert!(!derives_accept(&p, &word_structure("bbbbbb"), 40));
    }

    #[test]
    fn each_spurious_defect_triggers_accept() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        let p = build_tm_program(&tm).unwrap();
        // "ba" is a clean rejected word; each defect flips it to Accept.
        let base = word_structure("ba");
        assert!(!derives_accept(&p, &base, 40));
        let defects: &[Fact] = &[
            Fact::new("Begin", &["2"]),    // duplicated marker
            Fact::new("a", &["1"]),        // two letters on one position
            Fact::new("Tape", &["1", "3"]), // branching chain
            Fact::new("Tape", &["5", "6"]), // chain not rooted at Begin
            Fact::new("Tape", &["2", "3"]), // unlabeled element
            Fact::new("a", &["9"]),        // element off the chain
        ];
        for d in defects {
            let mut inst = base.clone();
            inst.insert(d.clone(), 0);
            assert!(derives_accept(&p, &inst, 40), "defect {d}");
        }
    }

    #[test]
    fn accept_is_monotone_under_extensions() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        let p = build_tm_program(&tm).unwrap();
        let mut inst = word_structure("ab");
        assert!(derives_accept(&p, &inst, 40));
        inst.insert(Fact::new("b", &["7"]), 0);
        inst.insert(Fact::new("End", &["9"]), 3);
        assert!(derives_accept(&p, &inst, 40));
    }

    #[test]
    fn stabilizes_on_accepting_inputs() {
        let tm = parse_machine(CONTAINS_AB).unwrap();
        let p = build_tm_program(&tm).unwrap();
        let (stable, at) = check_eventual_consistency(&p, &word_structure("bab"), 200);
        assert!(stable, "after acceptance the slices repeat verbatim");
        assert!(at.unwrap() < 30);
    }

    #[test]
    fn word_structure_is_the_documented_encoding() {
        let inst = word_structure("ab");
        let expect = parse_temporal_facts(
            "a(1)@0. b(2)@0. Tape(1,2)@0. Begin(1)@0. End(2)@0.",
        );
        assert_eq!(inst, expect);
    }

    fn parse_temporal_facts(s: &str) -> TemporalInstance {
        crate::dedalus::core::parse_temporal_instance(s).unwrap()
    }

    #[test]
    fn rejects_bad_machines() {
        assert!(matches!(
            parse_machine("states q0\ninput a\ntape a _\nblank _\nstart q1\naccept q0"),
            Err(DedalusError::BadMachine(_))
        ));
        // Accepting states must be terminal.
        assert!(matches!(
            parse_machine(
                "states q0 qa\ninput a\ntape a _\nblank _\nstart q0\naccept qa\n\
                 delta qa a -> q0 a R"
            ),
            Err(DedalusError::BadMachine(_))
        ));
        // State names may not shadow the fixed predicates.
        let tm = parse_machine(
            "states Word qa\ninput a\ntape a _\nblank _\nstart Word\naccept qa",
        )
        .unwrap();
        assert!(matches!(
            build_tm_program(&tm),
            Err(DedalusError::BadMachine(_))
        ));
    }
}
