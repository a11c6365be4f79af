//! Messages exchanged between the ATM components. Money is in cents.

pub type Cents = i64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardInserted {
    pub card: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnCard;

/// What the ATM asks the touchscreen to show.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScreenPrompt {
    EnterPin,
    ChooseTransaction {
        accounts: Vec<String>,
    },
    /// End of session; the screen discards any input the customer left.
    Goodbye,
}

/// What the customer entered in response to a prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScreenInput {
    Pin(String),
    Withdraw {
        amount: Cents,
        account: Option<String>,
    },
    Balance {
        account: Option<String>,
    },
    Transfer {
        from: String,
        to: String,
        amount: Cents,
    },
    Cancel,
    Ack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dispense {
    pub amount: Cents,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub atm: String,
    pub event: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerRequest {
    ValidatePin {
        card: String,
        pin: String,
    },
    Withdraw {
        account: String,
        amount: Cents,
    },
    Transfer {
        from: String,
        to: String,
        amount: Cents,
    },
    Balance {
        account: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerResponse {
    PinOk { accounts: Vec<String> },
    PinBad,
    Ok { new_balance: Cents },
    InsufficientFunds,
    Amount(Cents),
    UnknownAccount,
}
