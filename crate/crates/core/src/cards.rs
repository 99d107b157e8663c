//! Cards, their total order, and compact card sets.

use core::fmt;
use core::str::FromStr;

use thiserror::Error;

/// Card rank, lowest first: 3 4 5 6 7 8 9 10 J Q K A 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Rank {
    Three = 0,
    Four,
    Five,
    Six,
    Seven,
    Eight,
    Nine,
    Ten,
    Jack,
    Queen,
    King,
    Ace,
    Two,
}

impl Rank {
    pub const ALL: [Rank; 13] = [
        Rank::Three,
        Rank::Four,
        Rank::Five,
        Rank::Six,
        Rank::Seven,
        Rank::Eight,
        Rank::Nine,
        Rank::Ten,
        Rank::Jack,
        Rank::Queen,
        Rank::King,
        Rank::Ace,
        Rank::Two,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    /// Panics if `index >= 13`.
    pub fn from_index(index: u8) -> Rank {
        Rank::ALL[index as usize]
    }

    pub fn symbol(self) -> &'static str {
        const SYMBOLS: [&str; 13] = [
            "3", "4", "5", "6", "7", "8", "9", "10", "J", "Q", "K", "A", "2",
        ];
        SYMBOLS[self as usize]
    }
}

/// Suit, lowest first: Diamonds < Clubs < Hearts < Spades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Suit {
    Diamonds = 0,
    Clubs,
    Hearts,
    Spades,
}

impl Suit {
    pub const ALL: [Suit; 4] = [Suit::Diamonds, Suit::Clubs, Suit::Hearts, Suit::Spades];

    pub fn index(self) -> u8 {
        self as u8
    }

    /// Panics if `index >= 4`.
    pub fn from_index(index: u8) -> Suit {
        Suit::ALL[index as usize]
    }

    pub fn letter(self) -> char {
        ['D', 'C', 'H', 'S'][self as usize]
    }
}

/// A playing card, stored as its position `rank * 4 + suit` in the total
/// order (3D = 0, 2S = 51).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Card(u8);

impl Card {
    pub const THREE_OF_DIAMONDS: Card = Card(0);
    pub const TWO_OF_SPADES: Card = Card(51);

    pub fn new(rank: Rank, suit: Suit) -> Card {
        Card(rank.index() * 4 + suit.index())
    }

    pub fn from_order(order: u8) -> Option<Card> {
        (order < 52).then_some(Card(order))
    }

    pub fn order(self) -> u8 {
        self.0
    }

    pub fn rank(self) -> Rank {
        Rank::from_index(self.0 / 4)
    }

    pub fn suit(self) -> Suit {
        Suit::from_index(self.0 % 4)
    }

    /// All 52 cards in ascending order.
    pub fn deck() -> impl Iterator<Item = Card> {
        (0..52).map(Card)
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rank().symbol(), self.suit().letter())
    }
}

impl fmt::Debug for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid card text {0:?}")]
pub struct ParseCardError(pub alloc::string::String);

impl FromStr for Card {
    type Err = ParseCardError;

    fn from_str(s: &str) -> Result<Card, ParseCardError> {
        let err = || ParseCardError(s.into());
        let s = s.trim();
        let mut chars = s.chars();
        let suit_char = chars.next_back().ok_or_else(err)?;
        let rank_text = chars.as_str();
        let suit = match suit_char.to_ascii_uppercase() {
            'D' => Suit::Diamonds,
            'C' => Suit::Clubs,
            'H' => Suit::Hearts,
            'S' => Suit::Spades,
            _ => return Err(err()),
        };
        let rank = Rank::ALL
            .iter()
            .copied()
            .find(|r| r.symbol().eq_ignore_ascii_case(rank_text))
            .ok_or_else(err)?;
        Ok(Card::new(rank, suit))
    }
}

/// A set of cards packed into the low 52 bits of a `u64`. Iteration is in
/// ascending card order, so a `CardSet` doubles as a value-sorted hand.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CardSet(u64);

impl CardSet {
    pub const EMPTY: CardSet = CardSet(0);
    pub const FULL: CardSet = CardSet((1 << 52) - 1);

    pub fn from_bits(bits: u64) -> CardSet {
        CardSet(bits & Self::FULL.0)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, card: Card) -> bool {
        self.0 & (1 << card.0) != 0
    }

    pub fn insert(&mut self, card: Card) -> bool {
        let had = self.contains(card);
        self.0 |= 1 << card.0;
        !had
    }

    pub fn remove(&mut self, card: Card) -> bool {
        let had = self.contains(card);
        self.0 &= !(1 << card.0);
        had
    }

    pub fn union(self, other: CardSet) -> CardSet {
        CardSet(self.0 | other.0)
    }

    pub fn intersection(self, other: CardSet) -> CardSet {
        CardSet(self.0 & other.0)
    }

    pub fn difference(self, other: CardSet) -> CardSet {
        CardSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: CardSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> CardSetIter {
        CardSetIter(self.0)
    }

    /// Card at sorted position `index`, if the set is that large.
    pub fn nth(self, index: usize) -> Option<Card> {
        self.iter().nth(index)
    }

    /// Sorted position of `card`, if present.
    pub fn position(self, card: Card) -> Option<usize> {
        self.contains(card)
            .then(|| (self.0 & ((1u64 << card.0) - 1)).count_ones() as usize)
    }

    /// Copies the set into `out` in ascending order and returns the count.
    /// Panics if `out` is too short.
    pub fn write_sorted(self, out: &mut [Card]) -> usize {
        let mut n = 0;
        for card in self.iter() {
            out[n] = card;
            n += 1;
        }
        n
    }

    pub fn to_vec(self) -> alloc::vec::Vec<Card> {
        self.iter().collect()
    }
}

impl FromIterator<Card> for CardSet {
    fn from_iter<I: IntoIterator<Item = Card>>(iter: I) -> CardSet {
        let mut set = CardSet::EMPTY;
        for card in iter {
            set.insert(card);
        }
        set
    }
}

impl IntoIterator for CardSet {
    type Item = Card;
    type IntoIter = CardSetIter;

    fn into_iter(self) -> CardSetIter {
        self.iter()
    }
}

impl fmt::Debug for CardSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

pub struct CardSetIter(u64);

impl Iterator for CardSetIter {
    type Item = Card;

    fn next(&mut self) -> Option<Card> {
        if self.0 == 0 {
            return None;
        }
        let bit = self.0.trailing_zeros() as u8;
        self.0 &= self.0 - 1;
        Some(Card(bit))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CardSetIter {}

/// Parses a whitespace- or comma-separated card list such as `"3C, 10H 2S"`.
pub fn parse_cards(text: &str) -> Result<alloc::vec::Vec<Card>, ParseCardError> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}
