//! English inflection used by templates and the corpus miner.

use alloc::string::{String, ToString};

use crate::error::{Error, Result};

use super::Lexicon;

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("man", "men"),
    ("woman", "women"),
    ("child", "children"),
    ("person", "people"),
    ("foot", "feet"),
    ("tooth", "teeth"),
    ("goose", "geese"),
    ("mouse", "mice"),
    ("ox", "oxen"),
    ("life", "lives"),
    ("wife", "wives"),
    ("knife", "knives"),
    ("leaf", "leaves"),
    ("half", "halves"),
    ("shelf", "shelves"),
    ("wolf", "wolves"),
    ("thief", "thieves"),
    ("loaf", "loaves"),
    ("calf", "calves"),
    ("sheep", "sheep"),
    ("fish", "fish"),
    ("deer", "deer"),
    ("series", "series"),
    ("species", "species"),
];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Plural of `noun`: the lexicon entry if listed, else an irregular form,
/// else the -s / -es / -ies cascade.
pub fn pluralize(noun: &str, lexicon: Option<&Lexicon>) -> String {
    if let Some(pl) = lexicon.and_then(|l| l.plural_of(noun)) {
        return pl.to_string();
    }
    if let Some((_, pl)) = IRREGULAR_PLURALS.iter().find(|(sg, _)| *sg == noun) {
        return pl.to_string();
    }
    let mut chars = noun.chars().rev();
    let last = chars.next();
    let before = chars.next();
    if ["s", "x", "z", "ch", "sh"].iter().any(|suf| noun.ends_with(suf)) {
        return alloc::format!("{noun}es");
    }
    if last == Some('y') && before.is_some_and(|c| !is_vowel(c)) {
        return alloc::format!("{}ies", &noun[..noun.len() - 1]);
    }
    alloc::format!("{noun}s")
}

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

/// Lowercase English cardinal for 2..=99.
pub fn number_word(n: u32) -> Result<String> {
    match n {
        2..=19 => Ok(ONES[n as usize].to_string()),
        20..=99 => {
            let tens = TENS[(n / 10) as usize];
            match n % 10 {
                0 => Ok(tens.to_string()),
                unit => Ok(alloc::format!("{tens}-{}", ONES[unit as usize])),
            }
        }
        _ => Err(Error::arg(alloc::format!("numeral {n} outside 2..=99"))),
    }
}

pub(crate) fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

const IRREGULAR_PAST: &[(&str, &str)] = &[
    ("be", "was"), ("bear", "bore"), ("beat", "beat"), ("become", "became"), ("begin", "began"),
    ("bend", "bent"), ("bet", "bet"), ("bind", "bound"), ("bite", "bit"), ("bleed", "bled"),
    ("blow", "blew"), ("break", "broke"), ("breed", "bred"), ("bring", "brought"), ("build", "built"),
    ("burn", "burnt"), ("buy", "bought"), ("cast", "cast"), ("catch", "caught"), ("choose", "chose"),
    ("cling", "clung"), ("come", "came"), ("cost", "cost"), ("creep", "crept"), ("cut", "cut"),
    ("deal", "dealt"), ("dig", "dug"), ("do", "did"), ("draw", "drew"), ("dream", "dreamt"),
    ("drink", "drank"), ("drive", "drove"), ("eat", "ate"), ("fall", "fell"), ("feed", "fed"),
    ("feel", "felt"), ("fight", "fought"), ("find", "found"), ("flee", "fled"), ("fling", "flung"),
    ("fly", "flew"), ("forbid", "forbade"), ("forget", "forgot"), ("forgive", "forgave"),
    ("freeze", "froze"), ("get", "got"), ("give", "gave"), ("go", "went"), ("grind", "ground"),
    ("grow", "grew"), ("hang", "hung"), ("have", "had"), ("hear", "heard"), ("hide", "hid"),
    ("hit", "hit"), ("hold", "held"), ("hurt", "hurt"), ("keep", "kept"), ("kneel", "knelt"),
    ("know", "knew"), ("lay", "laid"), ("lead", "led"), ("lean", "leant"), ("leap", "leapt"),
    ("learn", "learnt"), ("leave", "left"), ("lend", "lent"), ("let", "let"), ("lie", "lay"),
    ("light", "lit"), ("lose", "lost"), ("make", "made"), ("mean", "meant"), ("meet", "met"),
    ("pay", "paid"), ("put", "put"), ("quit", "quit"), ("read", "read"), ("ride", "rode"),
    ("ring", "rang"), ("rise", "rose"), ("run", "ran"), ("say", "said"), ("see", "saw"),
    ("seek", "sought"), ("sell", "sold"), ("send", "sent"), ("set", "set"), ("shake", "shook"),
    ("shed", "shed"), ("shine", "shone"), ("shoot", "shot"), ("show", "showed"), ("shut", "shut"),
    ("sing", "sang"), ("sink", "sank"), ("sit", "sat"), ("sleep", "slept"), ("slide", "slid"),
    ("speak", "spoke"), ("spend", "spent"), ("spin", "spun"), ("split", "split"), ("spread", "spread"),
    ("stand", "stood"), ("steal", "stole"), ("stick", "stuck"), ("sting", "stung"), ("strike", "struck"),
    ("swear", "swore"), ("sweep", "swept"), ("swim", "swam"), ("swing", "swung"), ("take", "took"),
    ("teach", "taught"), ("tear", "tore"), ("tell", "told"), ("think", "thought"), ("throw", "threw"),
    ("understand", "understood"), ("wake", "woke"), ("wear", "wore"), ("weave", "wove"),
    ("weep", "wept"), ("win", "won"), ("wind", "wound"), ("withdraw", "withdrew"), ("write", "wrote"),
];

/// Past tense of `verb`: lexicon table, then the irregular table, then the
/// regular -ed rules. Returns `None` where the regular rule is ambiguous
/// (final-consonant doubling in polysyllables depends on stress).
pub fn past_tense(verb: &str, lexicon: Option<&Lexicon>) -> Option<String> {
    if let Some(p) = lexicon.and_then(|l| l.past_of(verb)) {
        return Some(p.to_string());
    }
    if let Some((_, p)) = IRREGULAR_PAST.iter().find(|(b, _)| *b == verb) {
        return Some(p.to_string());
    }
    if verb.is_empty() || !verb.chars().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    let chars: alloc::vec::Vec<char> = verb.chars().collect();
    let n = chars.len();
    let last = chars[n - 1];
    if last == 'e' {
        return Some(alloc::format!("{verb}d"));
    }
    if last == 'y' && n >= 2 && !is_vowel(chars[n - 2]) {
        return Some(alloc::format!("{}ied", &verb[..n - 1]));
    }
    let cvc = n >= 3
        && !is_vowel(last)
        && !matches!(last, 'w' | 'x' | 'y')
        && is_vowel(chars[n - 2])
        && !is_vowel(chars[n - 3]);
    if cvc {
        let vowel_groups = chars
            .iter()
            .zip(chars.iter().skip(1).chain(core::iter::once(&' ')))
            .filter(|(a, b)| is_vowel(**a) && !is_vowel(**b))
            .count();
        return match vowel_groups {
            1 => Some(alloc::format!("{verb}{last}ed")),
            _ => None,
        };
    }
    Some(alloc::format!("{verb}ed"))
}

/// Third-person singular present ("buy" → "buys", "watch" → "watches").
pub fn third_singular(verb: &str) -> Option<String> {
    match verb {
        "be" => return Some("is".to_string()),
        "have" => return Some("has".to_string()),
        "do" => return Some("does".to_string()),
        "go" => return Some("goes".to_string()),
        _ => {}
    }
    if verb.is_empty() || !verb.chars().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    Some(pluralize(verb, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plural_cascade() {
        assert_eq!(pluralize("road", None), "roads");
        assert_eq!(pluralize("box", None), "boxes");
        assert_eq!(pluralize("story", None), "stories");
        assert_eq!(pluralize("day", None), "days");
        assert_eq!(pluralize("church", None), "churches");
        assert_eq!(pluralize("child", None), "children");
    }

    #[test]
    fn number_words() {
        assert_eq!(number_word(5).unwrap(), "five");
        assert_eq!(number_word(90).unwrap(), "ninety");
        assert_eq!(number_word(17).unwrap(), "seventeen");
        assert_eq!(number_word(70).unwrap(), "seventy");
        assert_eq!(number_word(42).unwrap(), "forty-two");
        assert!(number_word(1).is_err());
        assert!(number_word(100).is_err());
    }

    #[test]
    fn past_forms() {
        assert_eq!(past_tense("buy", None).as_deref(), Some("bought"));
        assert_eq!(past_tense("cross", None).as_deref(), Some("crossed"));
        assert_eq!(past_tense("host", None).as_deref(), Some("hosted"));
        assert_eq!(past_tense("like", None).as_deref(), Some("liked"));
        assert_eq!(past_tense("carry", None).as_deref(), Some("carried"));
        assert_eq!(past_tense("stop", None).as_deref(), Some("stopped"));
        assert_eq!(past_tense("play", None).as_deref(), Some("played"));
        assert_eq!(past_tense("visit", None), None);
        assert_eq!(past_tense("Mary", None), None);
    }

    #[test]
    fn third_person() {
        assert_eq!(third_singular("buy").as_deref(), Some("buys"));
        assert_eq!(third_singular("watch").as_deref(), Some("watches"));
        assert_eq!(third_singular("have").as_deref(), Some("has"));
    }
}
