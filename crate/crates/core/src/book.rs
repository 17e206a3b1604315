//! Runs the code blocks of the guide in `book/` as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
#[cfg(doctest)]
pub struct Introduction;

#[doc = include_str!("../../../book/src/corpus.md")]
#[cfg(doctest)]
pub struct Corpus;

#[doc = include_str!("../../../book/src/preprocess.md")]
#[cfg(doctest)]
pub struct Preprocess;

#[doc = include_str!("../../../book/src/word2vec.md")]
#[cfg(doctest)]
pub struct Word2Vec;

#[doc = include_str!("../../../book/src/context.md")]
#[cfg(doctest)]
pub struct Context;

#[doc = include_str!("../../../book/src/siamese.md")]
#[cfg(doctest)]
pub struct Siamese;

#[doc = include_str!("../../../book/src/fuzzy.md")]
#[cfg(doctest)]
pub struct Fuzzy;

#[doc = include_str!("../../../book/src/pipeline.md")]
#[cfg(doctest)]
pub struct Pipeline;

#[doc = include_str!("../../../book/src/cli.md")]
#[cfg(doctest)]
pub struct Cli;
