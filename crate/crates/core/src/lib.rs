//! Equilibrium bidding, expected revenue and optimal prescreening for
//! second-price, first-price and all-pay auctions in which the seller admits
//! the top `n` of `m` bidders ranked by a copula-based predictor.

pub mod beliefs;
pub mod numerics;
pub mod predictors;
pub mod revenue;
pub mod simulate;
pub mod equilibria;
