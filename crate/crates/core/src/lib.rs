pub mod experiments;
pub mod flow;
pub mod formulations;
pub mod instance;
pub mod io;
pub mod lp;
pub mod oracle;
pub mod separation;
