//! GF(2) algebra of factorial effect words.

pub mod alias;
pub mod subgroup;
pub mod word;

pub use alias::{alias_class, alias_partition, join_words, AliasClass, DISPLAY_MAX_LEN};
pub use subgroup::{subgroup_closure, wordlength_pattern, DefiningRelation, WordLengthPattern, WordSubgroup};
pub use word::{letter, letter_index, w, word_product, EffectWord, MAX_FACTORS};
