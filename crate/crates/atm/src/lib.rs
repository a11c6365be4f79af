//! An ATM network built from the component and connector library: a
//! state-dependent ATM controller per machine, simulated devices, a
//! periodic log, and one bank server shared by every ATM.

pub mod bank;
pub mod controller;
pub mod devices;
pub mod log;
pub mod messages;
pub mod scenario;
pub mod server;
pub mod state;
pub mod system;

pub use bank::Bank;
pub use scenario::Scenario;
pub use system::{multi_atm_run, run_scenario, ConservationReport, RunConfig, RunError, RunReport};

/// The shipped architecture, accounts and scenarios.
pub mod assets {
    pub const ATM_ARCH: &str = include_str!("../assets/atm.arch");
    /// Same as [`ATM_ARCH`] but with a log that cannot keep up: the ATM
    /// stalls on its second log record.
    pub const STALLED_LOG_ARCH: &str = include_str!("../assets/stalled_log.arch");
    pub const ACCOUNTS: &str = include_str!("../assets/accounts.txt");

    pub mod scenarios {
        pub const WITHDRAW: &str = include_str!("../assets/scenarios/withdraw.scn");
        pub const WRONG_PIN: &str = include_str!("../assets/scenarios/wrong_pin.scn");
        pub const BALANCE: &str = include_str!("../assets/scenarios/balance.scn");
        pub const UNKNOWN_CARD: &str = include_str!("../assets/scenarios/unknown_card.scn");
        pub const TRANSFER: &str = include_str!("../assets/scenarios/transfer.scn");
        pub const OVERDRAW: &str = include_str!("../assets/scenarios/overdraw.scn");
        pub const SCREEN_FAULT: &str = include_str!("../assets/scenarios/screen_fault.scn");
        pub const TWO_CUSTOMERS: &str = include_str!("../assets/scenarios/two_customers.scn");
    }
}
