use super::{Ot2Backend, OtError, OtMessage, SenderEvent};

/// The ideal 1-of-2 functionality: returns `m_b`.
pub fn ideal_ot2(m0: &OtMessage, m1: &OtMessage, b: bool) -> Result<OtMessage, OtError> {
    if m0.len() != m1.len() {
        return Err(OtError::LengthMismatch(m0.len(), m1.len()));
    }
    Ok(if b { m1.clone() } else { m0.clone() })
}

/// Backend wrapping [`ideal_ot2`]. The sender's view of each call is only the
/// message length it supplied.
#[derive(Debug, Default, Clone)]
pub struct IdealOt2 {
    view: Vec<SenderEvent>,
}

impl Ot2Backend for IdealOt2 {
    fn transfer(&mut self, m0: &OtMessage, m1: &OtMessage, choice: bool) -> Result<OtMessage, OtError> {
        let out = ideal_ot2(m0, m1, choice)?;
        self.view.push(SenderEvent::Ideal { len: m0.len() });
        Ok(out)
    }

    fn sender_view(&self) -> &[SenderEvent] {
        &self.view
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selects_by_choice() {
        let m0 = OtMessage(vec![5]);
        let m1 = OtMessage(vec![9]);
        assert_eq!(ideal_ot2(&m0, &m1, true).unwrap(), m1);
        assert_eq!(ideal_ot2(&m0, &m1, false).unwrap(), m0);
        assert_eq!(ideal_ot2(&m0, &m0, true).unwrap(), m0);
        assert!(ideal_ot2(&m0, &OtMessage(vec![1, 2]), false).is_err());
    }

    #[test]
    fn sender_view_is_choice_independent() {
        let m0 = OtMessage(vec![5, 1]);
        let m1 = OtMessage(vec![9, 2]);
        let mut a = IdealOt2::default();
        let mut b = IdealOt2::default();
        a.transfer(&m0, &m1, false).unwrap();
        b.transfer(&m0, &m1, true).unwrap();
        assert_eq!(a.sender_view(), b.sender_view());
    }
}
