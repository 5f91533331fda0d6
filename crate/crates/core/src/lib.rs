pub mod bench;
pub mod caseio;
pub mod dcmodel;
pub mod lpcore;
pub mod opfsolve;
pub mod oracle;
pub mod screening;
