use serde::Serialize;
use subtle::ConstantTimeEq;

pub const MAX_AUTH_FAILURES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuthOutcome {
    Granted,
    Denied,
    LockedOut,
}

/// Compare `attempt` with the stored secret and return the outcome with the
/// updated consecutive-failure count. Once the count reaches the limit every
/// attempt is refused, correct or not.
pub fn authenticate(attempt: &[u8], stored: &[u8], failures: u32) -> (AuthOutcome, u32) {
    if failures >= MAX_AUTH_FAILURES {
        return (AuthOutcome::LockedOut, failures);
    }
    if bool::from(attempt.ct_eq(stored)) {
        return (AuthOutcome::Granted, 0);
    }
    let failures = failures + 1;
    if failures >= MAX_AUTH_FAILURES {
        (AuthOutcome::LockedOut, failures)
    } else {
        (AuthOutcome::Denied, failures)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_rules() {
        assert_eq!(authenticate(b"s3cret", b"s3cret", 0), (AuthOutcome::Granted, 0));
        assert_eq!(authenticate(b"s3cret", b"s3cret", 4), (AuthOutcome::Granted, 0));
        let mut n = 0;
        let mut last = AuthOutcome::Granted;
        for _ in 0..5 {
            (last, n) = authenticate(b"nope", b"s3cret", n);
        }
        assert_eq!((last, n), (AuthOutcome::LockedOut, 5));
        assert_eq!(authenticate(b"s3cret", b"s3cret", n).0, AuthOutcome::LockedOut);
        assert_eq!(authenticate(b"s3cre", b"s3cret", 0).0, AuthOutcome::Denied);
    }
}
