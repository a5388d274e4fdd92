pub mod analysis;
pub mod batch;
pub mod grid;
pub mod inertia;
pub mod linalg;
pub mod output;
pub mod passivity;
pub mod scenario;
pub mod sim;
pub mod supply;
