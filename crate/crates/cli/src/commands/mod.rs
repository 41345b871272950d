pub mod cluster;
pub mod compare;
pub mod hclust;
pub mod rand;
pub mod sil;
pub mod simulate;
