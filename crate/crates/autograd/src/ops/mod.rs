pub(crate) mod basic;
pub(crate) mod conv;
pub(crate) mod loss;
pub(crate) mod norm;
pub(crate) mod pool;
pub(crate) mod resize;
