pub mod common;
pub mod embed;
pub mod gnn;
pub mod gradcheck;
pub mod lora;
pub mod report;
pub mod selftest;
pub mod toy;
