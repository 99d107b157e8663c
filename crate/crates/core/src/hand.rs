//! Hand classification and comparison.
//!
//! Legal hands have 1 to 5 cards. Hands only ever compete against hands of
//! the same size; within a size they are ordered by a lexicographic key
//! `(category strength, primary, tiebreak)`.

use core::fmt;

use crate::cards::{Card, Rank};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HandCategory {
    Single,
    Pair,
    Triple,
    TwoPair,
    FourOfAKind,
    Straight,
    Flush,
    FullHouse,
    StraightFlush,
}

impl HandCategory {
    pub const ALL: [HandCategory; 9] = [
        HandCategory::Single,
        HandCategory::Pair,
        HandCategory::Triple,
        HandCategory::TwoPair,
        HandCategory::FourOfAKind,
        HandCategory::Straight,
        HandCategory::Flush,
        HandCategory::FullHouse,
        HandCategory::StraightFlush,
    ];

    pub fn card_count(self) -> usize {
        match self {
            HandCategory::Single => 1,
            HandCategory::Pair => 2,
            HandCategory::Triple => 3,
            HandCategory::TwoPair | HandCategory::FourOfAKind => 4,
            HandCategory::Straight
            | HandCategory::Flush
            | HandCategory::FullHouse
            | HandCategory::StraightFlush => 5,
        }
    }

    /// Rank of the category among categories with the same card count.
    pub fn strength(self) -> u8 {
        match self {
            HandCategory::Single
            | HandCategory::Pair
            | HandCategory::Triple
            | HandCategory::TwoPair
            | HandCategory::Straight => 0,
            HandCategory::FourOfAKind | HandCategory::Flush => 1,
            HandCategory::FullHouse => 2,
            HandCategory::StraightFlush => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            HandCategory::Single => "Single",
            HandCategory::Pair => "Pair",
            HandCategory::Triple => "Triple",
            HandCategory::TwoPair => "TwoPair",
            HandCategory::FourOfAKind => "FourOfAKind",
            HandCategory::Straight => "Straight",
            HandCategory::Flush => "Flush",
            HandCategory::FullHouse => "FullHouse",
            HandCategory::StraightFlush => "StraightFlush",
        }
    }
}

impl fmt::Display for HandCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison key; only meaningful between hands with the same card count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HandKey {
    pub strength: u8,
    pub primary: u8,
    pub tiebreak: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassifiedHand {
    cards: [Card; 5],
    len: u8,
    category: HandCategory,
    key: HandKey,
}

impl ClassifiedHand {
    /// Cards in ascending order.
    pub fn cards(&self) -> &[Card] {
        &self.cards[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn category(&self) -> HandCategory {
        self.category
    }

    pub fn key(&self) -> HandKey {
        self.key
    }

    pub fn highest_card(&self) -> Card {
        self.cards[self.len as usize - 1]
    }

    /// The card that decides comparisons: the top card of the tripled rank
    /// for a full house, the highest card otherwise.
    pub fn key_card(&self) -> Card {
        match self.category {
            HandCategory::FullHouse => {
                let rank = self.key.primary;
                *self
                    .cards()
                    .iter()
                    .rev()
                    .find(|c| c.rank().index() == rank)
                    .expect("full house contains its tripled rank")
            }
            _ => self.highest_card(),
        }
    }

    pub fn beats(&self, other: &ClassifiedHand) -> bool {
        beats(self, other)
    }
}

impl fmt::Debug for ClassifiedHand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:?}", self.category, self.cards())
    }
}

/// Classifies a set of 1 to 5 distinct cards. Returns `None` when the cards
/// do not form a legal hand, including for empty or oversized inputs.
pub fn classify(cards: &[Card]) -> Option<ClassifiedHand> {
    let len = cards.len();
    if len == 0 || len > 5 {
        return None;
    }
    let mut sorted = [Card::THREE_OF_DIAMONDS; 5];
    sorted[..len].copy_from_slice(cards);
    sorted[..len].sort_unstable();
    if sorted[..len].windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    let sorted_cards = &sorted[..len];
    let high = sorted_cards[len - 1];
    let same_rank = |a: usize, b: usize| sorted_cards[a].rank() == sorted_cards[b].rank();

    let (category, primary, tiebreak) = match len {
        1 => (HandCategory::Single, high.order(), 0),
        2 if same_rank(0, 1) => (HandCategory::Pair, high.rank().index(), high.suit().index()),
        3 if same_rank(0, 2) => (HandCategory::Triple, high.rank().index(), 0),
        4 if same_rank(0, 3) => (HandCategory::FourOfAKind, high.rank().index(), 0),
        4 if same_rank(0, 1) && same_rank(2, 3) => {
            (HandCategory::TwoPair, high.rank().index(), high.suit().index())
        }
        5 => {
            let flush = sorted_cards.iter().all(|c| c.suit() == high.suit());
            let straight = high.rank() <= Rank::Ace
                && sorted_cards
                    .windows(2)
                    .all(|w| w[1].rank().index() == w[0].rank().index() + 1);
            if straight && flush {
                (HandCategory::StraightFlush, high.order(), 0)
            } else if flush {
                (HandCategory::Flush, high.order(), 0)
            } else if straight {
                (HandCategory::Straight, high.order(), 0)
            } else if same_rank(0, 2) && same_rank(3, 4) {
                (HandCategory::FullHouse, sorted_cards[0].rank().index(), 0)
            } else if same_rank(0, 1) && same_rank(2, 4) {
                (HandCategory::FullHouse, sorted_cards[2].rank().index(), 0)
            } else {
                return None;
            }
        }
        _ => return None,
    };

    Some(ClassifiedHand {
        cards: sorted,
        len: len as u8,
        category,
        key: HandKey {
            strength: category.strength(),
            primary,
            tiebreak,
        },
    })
}

/// True iff `a` is strictly stronger than `b`. Hands with different card
/// counts never compare, so the result is `false` for them.
pub fn beats(a: &ClassifiedHand, b: &ClassifiedHand) -> bool {
    a.len == b.len && a.key > b.key
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::parse_cards;
    use alloc::string::ToString;

    fn hand(text: &str) -> ClassifiedHand {
        classify(&parse_cards(text).unwrap()).unwrap_or_else(|| panic!("{text} is not a hand"))
    }

    fn category(text: &str) -> Option<HandCategory> {
        classify(&parse_cards(text).unwrap()).map(|h| h.category())
    }

    #[test]
    fn classifies_worked_examples() {
        assert_eq!(category("5C 5H"), Some(HandCategory::Pair));
        let fh = hand("2S 2H 5C 5H 5S");
        assert_eq!(fh.category(), HandCategory::FullHouse);
        assert_eq!(fh.key().primary, Rank::Five.index());
        assert_eq!(category("3C 8C 10C AC 2C"), Some(HandCategory::Flush));
        assert_eq!(category("6D 7H 8C 9D 10C"), Some(HandCategory::Straight));
        assert_eq!(category("3D 4C"), None);
    }

    #[test]
    fn straight_rules() {
        assert_eq!(category("10D JC QH KS AD"), Some(HandCategory::Straight));
        // 2 is never adjacent to 3 or A.
        assert_eq!(category("JD QC KH AS 2D"), None);
        assert_eq!(category("2D 3C 4H 5S 6D"), None);
        assert_eq!(category("3H 4H 5H 6H 7H"), Some(HandCategory::StraightFlush));
        assert_eq!(category("3H 4H 5H 6H 2H"), Some(HandCategory::Flush));
    }

    #[test]
    fn rejects_non_hands() {
        assert_eq!(category("3D 3C 3H 4D"), None);
        assert_eq!(category("3D 3C 4H 5D"), None);
        assert_eq!(category("3D 3C 3H 3S 4D"), None);
        assert_eq!(category("3D 3C 4H 4S 5D"), None);
        assert_eq!(category("3D 4C 4H"), None);
        assert!(classify(&[]).is_none());
        let six = parse_cards("3D 4D 5D 6D 7D 8D").unwrap();
        assert!(classify(&six).is_none());
        let dup = parse_cards("3D 3D").unwrap();
        assert!(classify(&dup).is_none());
    }

    #[test]
    fn comparison_worked_examples() {
        assert!(beats(&hand("10D 10S"), &hand("10C 10H")));
        assert!(beats(&hand("10D 10S"), &hand("5C 5S")));
        assert!(beats(&hand("KC KH 4C 4H"), &hand("QD QS JH JS")));
        assert!(beats(&hand("3S 3H 10H 10S 10C"), &hand("2S 2H 5C 5H 5S")));
        assert!(beats(&hand("3D 3C 3H 3S"), &hand("AS AH 2S 2H")));
        assert!(!beats(&hand("AS AH 2S 2H"), &hand("3D 3C 3H 3S")));
        let x = hand("7H 7S");
        assert!(!beats(&x, &x));
    }

    #[test]
    fn five_card_category_order() {
        let straight = hand("10D JC QH KS AS");
        let flush = hand("3C 5C 7C 9C JC");
        let full_house = hand("3D 3C 3H 4D 4C");
        let straight_flush = hand("3D 4D 5D 6D 7D");
        assert!(beats(&flush, &straight));
        assert!(beats(&full_house, &flush));
        assert!(beats(&straight_flush, &full_house));
    }

    #[test]
    fn flush_and_straight_tie_on_highest_card_suit() {
        assert!(beats(&hand("3S 5S 7S 9S JS"), &hand("4H 6H 8H 10H JH")));
        assert!(beats(&hand("6D 7H 8C 9D 10S"), &hand("6S 7S 8H 9S 10C")));
    }

    #[test]
    fn two_pair_tiebreak_uses_higher_pair_suit() {
        assert!(beats(&hand("3D 3C KD KS"), &hand("4H 4S KC KH")));
    }

    #[test]
    fn different_sizes_never_beat() {
        assert!(!beats(&hand("2S"), &hand("3D 3C")));
        assert!(!beats(&hand("3D 3C"), &hand("2S")));
    }

    #[test]
    fn highest_and_key_card() {
        assert_eq!(hand("6D 7H 8C 9D 10C").highest_card().to_string(), "10C");
        assert_eq!(hand("3C 8C 10C AC 2C").highest_card().to_string(), "2C");
        assert_eq!(hand("3D").highest_card().to_string(), "3D");
        assert_eq!(hand("2S 2H 5C 5H 5S").key_card().to_string(), "5S");
    }

}
