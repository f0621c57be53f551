//! Relational data: schema, closed-world database, and counting.

mod conj;
pub(crate) mod count;
mod database;
mod load;
mod schema;

pub use conj::{count_groundings, enumerate_groundings, Conjunction, Grounding};
pub(crate) use conj::{compile, Compiled};
pub use database::{AtomSource, Database, DatabaseBuilder, Evidence, Pinned};
pub(crate) use database::{for_each_tuple, unravel};
pub use load::{csv_files, load_database, load_dir, load_with_schema, write_database};
pub use schema::{
    ConstId, FunctorDecl, FunctorId, FunctorInfo, FunctorKind, GroundAtom, PopId, Population, Schema, Value,
};
pub(crate) use schema::split_call;
