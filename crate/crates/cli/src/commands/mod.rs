pub mod compare;
pub mod eval;
pub mod gt_gen;
pub mod selfcheck;
