pub mod annotate;
pub mod compare;
pub mod evaluate;
pub mod ingest;
pub mod simulate;
