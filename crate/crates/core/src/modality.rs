use std::fmt;

/// The four per-sample information channels, in fusion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    /// User review history.
    User,
    /// Item review history.
    Item,
    /// Item metadata (title + description).
    Meta,
    /// Item image features.
    Visual,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::User, Modality::Item, Modality::Meta, Modality::Visual];
    pub const TEXT: [Modality; 3] = [Modality::User, Modality::Item, Modality::Meta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> &'static str {
        match self {
            Modality::User => "u",
            Modality::Item => "o",
            Modality::Meta => "m",
            Modality::Visual => "v",
        }
    }

    pub fn is_text(self) -> bool {
        self != Modality::Visual
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Which modalities are present for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ModalityMask {
    pub u: bool,
    pub o: bool,
    pub m: bool,
    pub v: bool,
}

impl ModalityMask {
    pub const ALL: ModalityMask = ModalityMask {
        u: true,
        o: true,
        m: true,
        v: true,
    };
    pub const NONE: ModalityMask = ModalityMask {
        u: false,
        o: false,
        m: false,
        v: false,
    };

    pub fn from_flags(flags: [bool; 4]) -> Self {
        ModalityMask {
            u: flags[0],
            o: flags[1],
            m: flags[2],
            v: flags[3],
        }
    }

    pub fn flags(&self) -> [bool; 4] {
        [self.u, self.o, self.m, self.v]
    }

    pub fn get(&self, m: Modality) -> bool {
        self.flags()[m.index()]
    }

    pub fn set(&mut self, m: Modality, present: bool) {
        match m {
            Modality::User => self.u = present,
            Modality::Item => self.o = present,
            Modality::Meta => self.m = present,
            Modality::Visual => self.v = present,
        }
    }

    pub fn with(mut self, m: Modality, present: bool) -> Self {
        self.set(m, present);
        self
    }

    pub fn and(&self, other: &ModalityMask) -> Self {
        let (a, b) = (self.flags(), other.flags());
        Self::from_flags([a[0] && b[0], a[1] && b[1], a[2] && b[2], a[3] && b[3]])
    }

    pub fn count(&self) -> usize {
        self.flags().iter().filter(|&&f| f).count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }

    pub fn all(&self) -> bool {
        self.count() == 4
    }
}

impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in Modality::ALL {
            if self.get(m) {
                f.write_str(m.short())?;
            } else {
                f.write_str("-")?;
            }
        }
        Ok(())
    }
}
