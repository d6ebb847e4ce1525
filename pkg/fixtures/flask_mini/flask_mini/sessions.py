class SessionMixin:
    modified = False

    def mark_modified(self):
        self.modified = True


class SecureCookieSession(dict, SessionMixin):
    def __init__(self, initial=None):
        super().__init__(initial or {})
        self.accessed = False

    def get_value(self, key, default=None):
        self.accessed = True
        return self.get(key, default)


def open_session(cookies):
    return SecureCookieSession(cookies)
