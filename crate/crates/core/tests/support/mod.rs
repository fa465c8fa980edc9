pub mod oracle;
pub mod regret_table;
