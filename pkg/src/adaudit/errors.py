"""Exception types raised across the toolkit."""


class AdAuditError(Exception):
    """Base class for all toolkit errors."""


# --- capture bundle loading ---

class MissingManifest(AdAuditError):
    pass


class SchemaViolation(AdAuditError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        super().__init__(f"schema violation on field {field!r}" + (f": {detail}" if detail else ""))


class OversizeBody(AdAuditError):
    def __init__(self, url: str):
        self.url = url
        super().__init__(f"response body over size cap for {url}")


# --- site label lists ---

class DuplicateConflict(AdAuditError):
    def __init__(self, site: str):
        self.site = site
        super().__init__(f"conflicting labels for site {site!r}")


class UnknownLabel(AdAuditError):
    def __init__(self, token: str):
        self.token = token
        super().__init__(f"unknown label {token!r}")


# --- registrable domains ---

class UnparsableHost(AdAuditError):
    def __init__(self, host: str, reason: str = ""):
        self.host = host
        super().__init__(f"cannot derive a registrable domain from {host!r}" + (f" ({reason})" if reason else ""))


# --- ad detection ---

class RedirectLoop(AdAuditError):
    def __init__(self, url: str):
        self.url = url
        super().__init__(f"redirect loop at {url}")


class MissingBundle(AdAuditError):
    def __init__(self, site: str):
        self.site = site
        super().__init__(f"no capture bundle for annotated site {site!r}")


# --- supply chain ---

class NotJson(AdAuditError):
    pass


# --- community detection ---

class EmptyGraph(AdAuditError):
    pass


class LevelOutOfRange(AdAuditError):
    def __init__(self, level: int, available: int):
        self.level = level
        self.available = available
        super().__init__(f"dendrogram level {level} out of range (have {available})")


# --- cluster analytics ---

class EmptyInput(AdAuditError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"no input for {what}")


# --- fetching ---

class FetchError(AdAuditError):
    pass


class Timeout(FetchError):
    pass


class TooManyRedirects(FetchError):
    pass


class ConnectionFailed(FetchError):
    pass
