"""Seeded synthetic scenario generator.

Produces desk-scale JSONL traces for eleven attack scenarios.  A benign
recording window samples only benign activities; an attack window mixes
benign-pattern events (which refinement later removes) with the actual
attack motifs.  Most scenarios share attack motifs (shell spawn by the
service, reverse-shell connects, sensitive-file reads, dropped-payload
execution) so models can generalize across them; the SQL-injection-style
scenario instead reuses its own benign vocabulary with different objects,
which is deliberately the hardest case.

Identifiers are randomized so the generated corpus exercises every
normalization rule: temp paths, /proc state, pipes, and hash-like names.
"""

from dataclasses import dataclass

from ..ingest import write_trace
from ..seeding import substream


def _hex_name(rng, length=12):
    return "".join("0123456789abcdef"[i] for i in rng.integers(0, 16, size=length))


def _client_endpoint(rng, net="198"):
    # Ephemeral peer endpoints; long enough that normalization always
    # treats them as volatile identifiers.
    return "%s.%d.%d.%d:%d" % (
        net,
        rng.integers(100, 255),
        rng.integers(100, 255),
        rng.integers(100, 255),
        rng.integers(10000, 65000),
    )


def _uuid_name(rng):
    raw = _hex_name(rng, 32)
    return "-".join((raw[:8], raw[8:12], raw[12:16], raw[16:20], raw[20:32]))


class _Emitter:
    """Accumulates events for one recording window."""

    def __init__(self, rng, scenario_id, label):
        self.rng = rng
        self.scenario_id = scenario_id
        self.label = label
        self.events = []
        self._ts = int(rng.integers(1_700_000_000, 1_800_000_000)) * 1_000_000_000
        self._pids = {}

    def pid(self, proc):
        if proc not in self._pids:
            self._pids[proc] = int(self.rng.integers(100, 32768))
        return self._pids[proc]

    def emit(self, proc, exe, syscall, fd_type="none", fd_name="", args=()):
        self._ts += int(self.rng.integers(1_000, 5_000_000))
        self.events.append(
            {
                "ts": self._ts,
                "syscall": syscall,
                "proc_name": proc,
                "pid": self.pid(proc),
                "exe_path": exe,
                "args": list(args),
                "fd_type": fd_type,
                "fd_name": fd_name,
                "label": self.label,
                "scenario_id": self.scenario_id,
            }
        )


@dataclass(frozen=True)
class ScenarioTemplate:
    """One scenario: benign activity mix plus attack motifs.

    Activities are callables taking an emitter; attack activities must
    produce at least one normalized pattern the benign ones never emit,
    so refinement always leaves signal.
    """

    name: str
    benign: tuple
    attack: tuple
    attack_benign_mix: float = 0.55


# --- shared activity builders ------------------------------------------------

def _serve(service, exe, docroot, pages, log):
    def activity(e):
        e.emit(service, exe, "accept", "ipv4", _client_endpoint(e.rng))
        page = pages[int(e.rng.integers(len(pages)))]
        e.emit(service, exe, "openat", "file", docroot + page)
        e.emit(service, exe, "read", "file", docroot + page)
        e.emit(service, exe, "write", "file", log)
        e.emit(service, exe, "close", "file", docroot + page)

    return activity


def _config_read(service, exe, conf):
    def activity(e):
        e.emit(service, exe, "openat", "file", conf)
        e.emit(service, exe, "read", "file", conf)
        e.emit(service, exe, "close", "file", conf)

    return activity


def _worker_spawn(service, exe):
    def activity(e):
        e.emit(service, exe, "clone")
        e.emit(service, exe, "read", "pipe", "pipe:[%d]" % e.rng.integers(1000, 999999))

    return activity


def _db_upstream(service, exe, endpoint="127.0.0.1:3306"):
    def activity(e):
        e.emit(service, exe, "connect", "ipv4", endpoint)
        e.emit(service, exe, "read", "pipe", "pipe:[%d]" % e.rng.integers(1000, 999999))

    return activity


def _tmp_scratch(service, exe):
    def activity(e):
        name = "/tmp/%s-%s" % (service, _hex_name(e.rng))
        e.emit(service, exe, "open", "file", name)
        e.emit(service, exe, "write", "file", name)
        e.emit(service, exe, "unlink", "file", name)

    return activity


def _proc_poll(e):
    target = "/proc/%d/stat" % e.rng.integers(100, 32768)
    e.emit("ps", "/usr/bin/ps", "open", "file", target)
    e.emit("ps", "/usr/bin/ps", "close", "file", target)


def _cron_job(e):
    e.emit("crond", "/usr/sbin/crond", "clone")
    e.emit(
        "sh",
        "/bin/sh",
        "execve",
        "file",
        "/usr/sbin/logrotate",
        args=("/etc/cron.daily/logrotate.sh",),
    )
    e.emit("logrotate", "/usr/sbin/logrotate", "rename", "file", "/var/log/syslog")


def _pkg_refresh(e):
    e.emit("apt", "/usr/bin/apt", "openat", "file", "/var/lib/dpkg/status")
    e.emit("apt", "/usr/bin/apt", "read", "file", "/var/lib/dpkg/status")
    e.emit(
        "apt",
        "/usr/bin/apt",
        "write",
        "file",
        "/var/cache/apt/archives/%s.deb" % _uuid_name(e.rng),
    )


def _mirror_sync(e):
    e.emit("apt", "/usr/bin/apt", "connect", "ipv4", "151.101.0.10:443")
    _pkg_refresh(e)


# --- shared attack motifs -----------------------------------------------------

def _shell_spawn(service, exe):
    def activity(e):
        e.emit(service, exe, "execve", "file", "/bin/sh")
        e.emit("sh", "/bin/sh", "execve", "file", "/usr/bin/id")
        e.emit("sh", "/bin/sh", "execve", "file", "/usr/bin/whoami")

    return activity


def _reverse_shell(e):
    e.emit("sh", "/bin/sh", "connect", "ipv4", "6.6.6.6:4444")
    e.emit("nc", "/usr/bin/nc", "connect", "ipv4", "6.6.6.6:4444")


def _path_traversal(service, exe):
    def activity(e):
        e.emit(service, exe, "openat", "file", "/etc/passwd")
        e.emit(service, exe, "openat", "file", "/etc/shadow")
        e.emit(service, exe, "read", "file", "/etc/shadow")

    return activity


def _payload_drop(e):
    payload = "/tmp/.%s" % _hex_name(e.rng, 16)
    e.emit("sh", "/bin/sh", "open", "file", payload)
    e.emit("sh", "/bin/sh", "write", "file", payload)
    e.emit("sh", "/bin/sh", "chmod", "file", payload)
    e.emit("sh", "/bin/sh", "execve", "file", payload)


def _exfil_read(e):
    e.emit("sh", "/bin/sh", "read", "file", "/etc/shadow")
    e.emit("sh", "/bin/sh", "connect", "ipv4", "6.6.6.6:4444")


# --- template catalogue --------------------------------------------------------

#: Background every host runs regardless of the service under test; keeps
#: the benign clusters of different scenarios anchored to shared patterns.
_BACKGROUND = (_proc_poll, _cron_job, _mirror_sync) * 2


def _web_template(name, service, exe, docroot, conf, log):
    pages = ("index.html", "status.html", "app.css", "main.js")
    return ScenarioTemplate(
        name=name,
        benign=(
            _serve(service, exe, docroot, pages, log),
            _serve(service, exe, docroot, pages, log),
            _config_read(service, exe, conf),
            _worker_spawn(service, exe),
            _db_upstream(service, exe),
            _tmp_scratch(service, exe),
        )
        + _BACKGROUND,
        attack=(
            _shell_spawn(service, exe),
            _reverse_shell,
            _path_traversal(service, exe),
            _payload_drop,
        ),
    )


def _interp_service(name, proc, exe, script, db, log):
    def app_request(e):
        e.emit(proc, exe, "accept", "ipv4", _client_endpoint(e.rng, "203"), args=(script,))
        e.emit(proc, exe, "read", "file", db, args=(script,))
        e.emit(proc, exe, "write", "file", log, args=(script,))

    def app_start(e):
        e.emit(proc, exe, "execve", "file", exe, args=(script,))
        e.emit(proc, exe, "openat", "file", db, args=(script,))

    return ScenarioTemplate(
        name=name,
        benign=(
            app_request,
            app_request,
            app_start,
            _tmp_scratch(proc, exe),
            _worker_spawn(proc, exe),
            _db_upstream(proc, exe),
        )
        + _BACKGROUND,
        attack=(
            _shell_spawn(proc, exe),
            _reverse_shell,
            _path_traversal(proc, exe),
            _payload_drop,
        ),
    )


def _jetty_template():
    args = (
        "-Djetty.home=/jetty",
        "-Djava.io.tmpdir=/tmp/jetty",
        "/jetty/start.jar",
        "--module=http",
    )

    def jvm_start(e):
        e.emit("java", "/usr/bin/java", "clone", args=args)
        e.emit("java", "/usr/bin/java", "openat", "file", "/jetty/etc/jetty.xml", args=args)

    def jvm_serve(e):
        e.emit("java", "/usr/bin/java", "accept", "ipv4", _client_endpoint(e.rng, "205"), args=args)
        e.emit("java", "/usr/bin/java", "read", "file", "/jetty/webapps/root.war", args=args)
        e.emit("java", "/usr/bin/java", "write", "file", "/jetty/logs/request.log", args=args)

    return ScenarioTemplate(
        name="java-jetty",
        benign=(jvm_start, jvm_serve, jvm_serve, _tmp_scratch("java", "/usr/bin/java"),
                _worker_spawn("java", "/usr/bin/java"),
                _db_upstream("java", "/usr/bin/java")) + _BACKGROUND,
        attack=(
            _shell_spawn("java", "/usr/bin/java"),
            _reverse_shell,
            _path_traversal("java", "/usr/bin/java"),
            _payload_drop,
        ),
    )


def _docker_template():
    def daemon_config(e):
        tmp = "/var/lib/docker/.tmp-config.v2.json%08d" % e.rng.integers(0, 10**8)
        e.emit("dockerd", "/usr/bin/dockerd", "open", "file", tmp)
        e.emit("dockerd", "/usr/bin/dockerd", "write", "file", tmp)
        e.emit("dockerd", "/usr/bin/dockerd", "rename", "file", tmp)

    def layer_io(e):
        # Layer directories are hash-named; the volatile part is the basename.
        layer = "/var/lib/docker/overlay2/%s" % _uuid_name(e.rng)
        e.emit("dockerd", "/usr/bin/dockerd", "openat", "file", layer)
        e.emit("dockerd", "/usr/bin/dockerd", "read", "file", layer)
        e.emit("containerd", "/usr/bin/containerd", "read", "pipe",
               "pipe:[%d]" % e.rng.integers(1000, 999999))

    return ScenarioTemplate(
        name="docker-escape",
        benign=(daemon_config, layer_io, layer_io,
                _config_read("dockerd", "/usr/bin/dockerd", "/etc/docker/daemon.json"),
                _db_upstream("dockerd", "/usr/bin/dockerd")) + _BACKGROUND,
        attack=(
            _shell_spawn("dockerd", "/usr/bin/dockerd"),
            _shell_spawn("runc", "/usr/sbin/runc"),
            _reverse_shell,
            _payload_drop,
        ),
    )


def _ftp_template():
    def transfer(e):
        e.emit("vsftpd", "/usr/sbin/vsftpd", "accept", "ipv4", _client_endpoint(e.rng, "172"))
        share = ("/srv/ftp/report.txt", "/srv/ftp/data.csv", "/srv/ftp/readme.txt")
        path = share[int(e.rng.integers(len(share)))]
        e.emit("vsftpd", "/usr/sbin/vsftpd", "openat", "file", path)
        e.emit("vsftpd", "/usr/sbin/vsftpd", "read", "file", path)

    return ScenarioTemplate(
        name="ftp-exfil",
        benign=(transfer, transfer,
                _config_read("vsftpd", "/usr/sbin/vsftpd", "/etc/vsftpd.conf"),
                _worker_spawn("vsftpd", "/usr/sbin/vsftpd"),
                _tmp_scratch("vsftpd", "/usr/sbin/vsftpd")) + _BACKGROUND,
        attack=(
            _shell_spawn("vsftpd", "/usr/sbin/vsftpd"),
            _path_traversal("vsftpd", "/usr/sbin/vsftpd"),
            _exfil_read,
            _payload_drop,
        ),
    )


def _pkg_template():
    def wget_fetch(e):
        e.emit("wget", "/usr/bin/wget", "connect", "ipv4", "6.6.6.6:4444")
        e.emit("wget", "/usr/bin/wget", "write", "file",
               "/tmp/%s" % _hex_name(e.rng, 20))

    return ScenarioTemplate(
        name="pkg-backdoor",
        benign=(_mirror_sync, _mirror_sync,
                _tmp_scratch("apt", "/usr/bin/apt"),
                _config_read("apt", "/usr/bin/apt", "/etc/apt/sources.list"))
        + _BACKGROUND,
        attack=(wget_fetch, _payload_drop, _reverse_shell,
                _shell_spawn("dpkg", "/usr/bin/dpkg")),
    )


def _sqli_template():
    script = "/srv/app/api.py"
    proc, exe = "python3", "/usr/bin/python3"

    def api_request(e):
        e.emit(proc, exe, "accept", "ipv4", _client_endpoint(e.rng, "209"), args=(script,))
        e.emit(proc, exe, "read", "file", "/var/lib/app/app.db", args=(script,))
        e.emit(proc, exe, "write", "file", "/var/log/app/api.log", args=(script,))

    def db_io(e):
        e.emit("mariadbd", "/usr/sbin/mariadbd", "read", "file", "/var/lib/mysql/app.ibd")
        e.emit("mariadbd", "/usr/sbin/mariadbd", "write", "file", "/var/lib/mysql/app.ibd")

    # Injection consequences surface on the database server: file-read
    # primitives, INTO OUTFILE dumps, and credential-table probes.  No
    # shell spawn, no attacker endpoint: this stays the distinct,
    # low-signal case.
    def file_read_probe(e):
        e.emit("mariadbd", "/usr/sbin/mariadbd", "openat", "file", "/etc/passwd")
        e.emit("mariadbd", "/usr/sbin/mariadbd", "read", "file", "/etc/passwd")
        e.emit("mariadbd", "/usr/sbin/mariadbd", "openat", "file", "/etc/shadow")

    def outfile_dump(e):
        e.emit("mariadbd", "/usr/sbin/mariadbd", "write", "file", "/var/backups/dump.csv")
        e.emit("mariadbd", "/usr/sbin/mariadbd", "read", "file", "/var/lib/mysql/mysql/user.MYD")

    def credential_probe(e):
        e.emit("mariadbd", "/usr/sbin/mariadbd", "openat", "file", "/etc/app/secret.key")
        e.emit("mariadbd", "/usr/sbin/mariadbd", "read", "file", "/etc/app/secret.key")

    return ScenarioTemplate(
        name="sql-injection",
        benign=(api_request, api_request, db_io,
                _tmp_scratch(proc, exe), _worker_spawn("mariadbd", "/usr/sbin/mariadbd"),
                _db_upstream(proc, exe)) + _BACKGROUND,
        attack=(file_read_probe, file_read_probe, file_read_probe,
                outfile_dump, credential_probe),
        attack_benign_mix=0.65,
    )


def _ssh_template():
    def session(e):
        e.emit("sshd", "/usr/sbin/sshd", "accept", "ipv4", _client_endpoint(e.rng, "192"))
        e.emit("sshd", "/usr/sbin/sshd", "clone")
        e.emit("sshd", "/usr/sbin/sshd", "openat", "file", "/var/log/auth.log")
        e.emit("sshd", "/usr/sbin/sshd", "write", "file", "/var/log/auth.log")

    def key_check(e):
        e.emit("sshd", "/usr/sbin/sshd", "openat", "file", "/etc/ssh/sshd_config")
        e.emit("sshd", "/usr/sbin/sshd", "read", "file", "/etc/ssh/sshd_config")

    def lateral_move(e):
        e.emit("sshd", "/usr/sbin/sshd", "execve", "file", "/bin/sh")
        e.emit("scp", "/usr/bin/scp", "read", "file", "/etc/shadow")
        e.emit("ssh", "/usr/bin/ssh", "connect", "ipv4", "6.6.6.6:4444")

    return ScenarioTemplate(
        name="ssh-lateral",
        benign=(session, session, key_check, _worker_spawn("sshd", "/usr/sbin/sshd"),
                _tmp_scratch("sshd", "/usr/sbin/sshd")) + _BACKGROUND,
        attack=(lateral_move, _shell_spawn("sshd", "/usr/sbin/sshd"),
                _reverse_shell, _payload_drop),
    )


TEMPLATES = {
    "web-apache": _web_template(
        "web-apache", "httpd", "/usr/sbin/httpd",
        "/var/www/html/", "/etc/httpd/httpd.conf", "/var/log/httpd/access.log"),
    "web-nginx": _web_template(
        "web-nginx", "nginx", "/usr/sbin/nginx",
        "/usr/share/nginx/html/", "/etc/nginx/nginx.conf", "/var/log/nginx/access.log"),
    "java-jetty": _jetty_template(),
    "node-app": _interp_service(
        "node-app", "node", "/usr/bin/node",
        "/srv/app/server.js", "/srv/app/store.json", "/var/log/app/node.log"),
    "python-flask": _interp_service(
        "python-flask", "python3", "/usr/bin/python3",
        "/srv/web/app.py", "/srv/web/site.db", "/var/log/app/web.log"),
    "docker-escape": _docker_template(),
    "cron-privesc": ScenarioTemplate(
        name="cron-privesc",
        benign=(_cron_job, _cron_job,
                _tmp_scratch("crond", "/usr/sbin/crond"),
                _config_read("crond", "/usr/sbin/crond", "/etc/crontab"),
                _worker_spawn("crond", "/usr/sbin/crond")) + _BACKGROUND,
        attack=(_shell_spawn("crond", "/usr/sbin/crond"), _payload_drop,
                _exfil_read, _reverse_shell),
    ),
    "ftp-exfil": _ftp_template(),
    "pkg-backdoor": _pkg_template(),
    "sql-injection": _sqli_template(),
    "ssh-lateral": _ssh_template(),
}

#: The eleven-scenario suite used by the end-to-end protocol.  The first
#: five (the base training block) cover web serving plus every
#: complement-bearing subject kind; the held-out tail moves to new
#: service archetypes.  The SQL-injection case sits at S10 and is
#: expected to be the weak spot.
SCENARIO_SUITE = (
    ("S01", "web-apache"),
    ("S02", "web-nginx"),
    ("S03", "java-jetty"),
    ("S04", "node-app"),
    ("S05", "python-flask"),
    ("S06", "docker-escape"),
    ("S07", "cron-privesc"),
    ("S08", "ftp-exfil"),
    ("S09", "pkg-backdoor"),
    ("S10", "sql-injection"),
    ("S11", "ssh-lateral"),
)


def generate_events(template: ScenarioTemplate, scenario_id: str, seed: int,
                    n_benign: int, n_attack: int):
    """Deterministically generate one scenario's events as dicts."""
    if n_benign <= 0 or n_attack <= 0:
        raise ValueError("event counts must be positive")
    rng = substream(seed, "synth", template.name, scenario_id)

    benign = _Emitter(rng, scenario_id, "benign")
    while len(benign.events) < n_benign:
        activity = template.benign[int(rng.integers(len(template.benign)))]
        activity(benign)

    attack = _Emitter(rng, scenario_id, "adversarial")
    while len(attack.events) < n_attack:
        if rng.random() < template.attack_benign_mix:
            activity = template.benign[int(rng.integers(len(template.benign)))]
        else:
            activity = template.attack[int(rng.integers(len(template.attack)))]
        activity(attack)

    return benign.events[:n_benign] + attack.events[:n_attack]


def generate_scenario(template_name: str, scenario_id: str, seed: int,
                      n_benign: int, n_attack: int, path) -> int:
    """Write one scenario trace as JSONL; returns the event count."""
    if template_name not in TEMPLATES:
        raise KeyError(
            "unknown template %r (available: %s)"
            % (template_name, ", ".join(sorted(TEMPLATES)))
        )
    events = generate_events(
        TEMPLATES[template_name], scenario_id, seed, n_benign, n_attack
    )
    return write_trace(events, path)


def generate_suite(seed: int, n_benign: int, n_attack: int):
    """Events for the full S01..S11 suite, keyed by scenario id."""
    return {
        scenario_id: generate_events(
            TEMPLATES[name], scenario_id, seed, n_benign, n_attack
        )
        for scenario_id, name in SCENARIO_SUITE
    }
