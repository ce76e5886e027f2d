"""Dictionary that refuses writes once locked"""
from ..exceptions import ConfigError




class LockableDict(dict):
    """Dictionary that can be frozen after validation

    Args:
        name (str): dotted path of the section, used in error messages
    """

    def __init__(self, *args, **kwargs):
        self.name = kwargs.pop('name', '')
        super(LockableDict, self).__init__(*args, **kwargs)
        self._locked = False


    def __setitem__(self, key, val):
        if self._locked:
            field = '.'.join([s for s in (self.name, str(key)) if s])
            raise ConfigError(field, 'section is locked')
        super(LockableDict, self).__setitem__(key, val)


    def lock(self):
        """Locks this dict and every LockableDict nested inside it"""
        for val in self.values():
            if isinstance(val, LockableDict):
                val.lock()
        self._locked = True


    def unlock(self):
        self._locked = False


    @property
    def locked(self):
        return self._locked
