"""Subclass of dictionary designed to read/store at depth"""
import re
import pprint as pp
from collections.abc import Mapping




class DeepDict(dict):
    """Read and retrieve keys from a dict of arbitary depth"""

    def __init__(self, *args, **kwargs):
        super(DeepDict, self).__init__(*args, **kwargs)
        for key, val in list(self.items()):
            dict.__setitem__(self, key, self._coerce_dicts(val))


    def __call__(self, *args):
        """Shorthand for DeepDict.pull(*args)"""
        return self.pull(*args)


    def __str__(self):
        return pp.pformat(self.to_dict())


    def _coerce_dicts(self, val):
        """Converts nested mappings to the class of this dict"""
        if isinstance(val, Mapping) and not isinstance(val, DeepDict):
            return self.__class__(val)
        if isinstance(val, list):
            return [self._coerce_dicts(item) for item in val]
        return val


    def pull(self, *args):
        """Returns data from the path stipulated by args

        Args:
            args: the path to a value in the dictionary, with either one
                path segment per arg or a single period- or slash-delimited arg

        Returns:
            Value for the given path, if exists
        """
        if len(args) == 1:
            args = re.split(r'[/\.]', args[0])
        val = self
        for arg in args:
            try:
                val = val[arg]
            except (KeyError, TypeError):
                raise KeyError('.'.join([str(a) for a in args]))
        return val


    def get_path(self, path, default=None):
        """Like dict.get but for a dotted path"""
        try:
            return self.pull(path)
        except KeyError:
            return default


    def push(self, val, *args):
        """Adds data to the path stipulated by *args

        Args:
            val (mixed): the value to add
            *args: the path to a value in the dictionary, one component
                per arg
        """
        if len(args) == 1:
            args = re.split(r'[/\.]', args[0])
        mapping = self
        for arg in args[:-1]:
            mapping = mapping.setdefault(arg, self.__class__())
        mapping[args[-1]] = self._coerce_dicts(val)


    def merge(self, other):
        """Recursively merges another mapping into this one in place"""
        for key, val in other.items():
            if isinstance(val, Mapping) and isinstance(self.get(key), Mapping):
                self[key].merge(val)
            else:
                self[key] = self._coerce_dicts(val)
        return self


    def to_dict(self):
        """Returns a copy of the data as plain dicts and lists"""
        def _plain(val):
            if isinstance(val, Mapping):
                return {key: _plain(v) for key, v in val.items()}
            if isinstance(val, list):
                return [_plain(v) for v in val]
            return val
        return _plain(self)
