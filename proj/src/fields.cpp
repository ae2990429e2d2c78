#include "preform/fields.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

namespace preform {

namespace fs = std::filesystem;

bool is_finite(const Jacobian2& j) {
    return std::isfinite(j.du_x_dx) && std::isfinite(j.du_x_dy) &&
           std::isfinite(j.du_y_dx) && std::isfinite(j.du_y_dy);
}

Jacobian2 DisplacementField::jacobian(Point2) const {
    throw std::logic_error("DisplacementField: no analytic jacobian available");
}

std::vector<Vector2> DisplacementField::evaluate_batch(std::span<const Point2> points) const {
    std::vector<Vector2> out;
    out.reserve(points.size());
    for (const Point2& p : points) {
        out.push_back(evaluate(p));
    }
    return out;
}

AffineShearVolumetricField::AffineShearVolumetricField(double alpha) : alpha_(alpha) {
    if (!std::isfinite(alpha)) {
        throw std::invalid_argument("AffineShearVolumetricField: alpha must be finite");
    }
}

Vector2 AffineShearVolumetricField::evaluate(Point2 p) const {
    return {alpha_ * (p.x + p.y), alpha_ * (p.x - p.y)};
}

Jacobian2 AffineShearVolumetricField::jacobian(Point2) const {
    return {alpha_, alpha_, alpha_, -alpha_};
}

Jacobian2 fd_jacobian(const DisplacementField& field, Point2 p, double h) {
    if (!std::isfinite(h) || h <= 0.0) {
        throw std::invalid_argument("fd_jacobian: step h must be positive and finite");
    }
    const Vector2 xp = field.evaluate({p.x + h, p.y});
    const Vector2 xm = field.evaluate({p.x - h, p.y});
    const Vector2 yp = field.evaluate({p.x, p.y + h});
    const Vector2 ym = field.evaluate({p.x, p.y - h});
    return {(xp.dx - xm.dx) / (2.0 * h), (yp.dx - ym.dx) / (2.0 * h),
            (xp.dy - xm.dy) / (2.0 * h), (yp.dy - ym.dy) / (2.0 * h)};
}

std::vector<Jacobian2> fd_jacobians(const DisplacementField& field,
                                    std::span<const Point2> points, double h) {
    if (!std::isfinite(h) || h <= 0.0) {
        throw std::invalid_argument("fd_jacobians: step h must be positive and finite");
    }
    const std::size_t n = points.size();
    std::vector<Point2> shifted(n);
    const auto shift_all = [&](double dx, double dy) {
        for (std::size_t i = 0; i < n; ++i) {
            shifted[i] = {points[i].x + dx, points[i].y + dy};
        }
        return field.evaluate_batch(shifted);
    };
    const auto xp = shift_all(h, 0.0);
    const auto xm = shift_all(-h, 0.0);
    const auto yp = shift_all(0.0, h);
    const auto ym = shift_all(0.0, -h);

    std::vector<Jacobian2> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = {(xp[i].dx - xm[i].dx) / (2.0 * h), (yp[i].dx - ym[i].dx) / (2.0 * h),
                  (xp[i].dy - xm[i].dy) / (2.0 * h), (yp[i].dy - ym[i].dy) / (2.0 * h)};
    }
    return out;
}

double default_fd_step(const BoundaryCurve& curve) {
    const double diag = characteristic_length(curve);
    if (diag <= 0.0) {
        throw std::invalid_argument(
            "default_fd_step: curve has a degenerate bounding box, pass an explicit step");
    }
    return 1e-6 * diag;
}

namespace {

struct CommandResult {
    int exit_status = -1;
    bool timed_out = false;
    std::string output;  // combined stdout + stderr
};

/// Runs `sh -c command` with the child in its own process group, capturing
/// combined output. On timeout the whole group is killed.
CommandResult run_command(const std::string& command, double timeout_seconds) {
    int pipe_fds[2];
    if (::pipe(pipe_fds) != 0) {
        throw AdapterError("failed to create pipe: " + std::string(std::strerror(errno)));
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(pipe_fds[0]);
        ::close(pipe_fds[1]);
        throw AdapterError("failed to fork: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(pipe_fds[1], STDOUT_FILENO);
        ::dup2(pipe_fds[1], STDERR_FILENO);
        ::close(pipe_fds[0]);
        ::close(pipe_fds[1]);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }

    ::close(pipe_fds[1]);
    const int read_fd = pipe_fds[0];
    ::fcntl(read_fd, F_SETFL, O_NONBLOCK);

    CommandResult result;
    const auto deadline =
        std::chrono::steady_clock::now() +
        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(timeout_seconds));

    char buf[4096];
    bool open = true;
    while (open) {
        const auto now = std::chrono::steady_clock::now();
        if (!result.timed_out && now >= deadline) {
            result.timed_out = true;
            ::kill(-pid, SIGKILL);
        }
        const auto wait_ms =
            result.timed_out
                ? 50
                : std::max<long>(
                      1, std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now)
                             .count());
        struct pollfd pfd{read_fd, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long>(wait_ms, 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc > 0) {
            while (true) {
                const ssize_t n = ::read(read_fd, buf, sizeof buf);
                if (n > 0) {
                    result.output.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0) {
                    open = false;
                    break;
                } else {
                    if (errno == EINTR) continue;
                    if (errno != EAGAIN && errno != EWOULDBLOCK) open = false;
                    break;
                }
            }
        }
    }
    ::close(read_fd);

    int wait_status = 0;
    while (::waitpid(pid, &wait_status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(wait_status)) {
        result.exit_status = WEXITSTATUS(wait_status);
    } else if (WIFSIGNALED(wait_status)) {
        result.exit_status = -WTERMSIG(wait_status);
    }
    return result;
}

std::string shell_quote(const std::string& s) {
    std::string quoted = "'";
    for (const char c : s) {
        if (c == '\'') {
            quoted += "'\\''";
        } else {
            quoted += c;
        }
    }
    quoted += "'";
    return quoted;
}

std::string substitute_workdir(const std::string& command, const std::string& workdir) {
    static constexpr std::string_view kPlaceholder = "{workdir}";
    const std::string quoted = shell_quote(workdir);
    std::string out;
    std::size_t pos = 0;
    bool substituted = false;
    while (true) {
        const auto hit = command.find(kPlaceholder, pos);
        if (hit == std::string::npos) break;
        out.append(command, pos, hit - pos);
        out += quoted;
        pos = hit + kPlaceholder.size();
        substituted = true;
    }
    out.append(command, pos, std::string::npos);
    if (!substituted) {
        out += ' ';
        out += quoted;
    }
    return out;
}

std::string trim_for_message(const std::string& s) {
    constexpr std::size_t kMax = 2000;
    if (s.size() <= kMax) return s;
    return s.substr(0, kMax) + "... [truncated]";
}

}  // namespace

ExternalSolverField::ExternalSolverField(std::string command, std::string workdir,
                                         double timeout_seconds)
    : command_(std::move(command)),
      workdir_(std::move(workdir)),
      timeout_seconds_(timeout_seconds) {
    if (command_.empty()) {
        throw std::invalid_argument("ExternalSolverField: empty command");
    }
    if (workdir_.empty()) {
        throw std::invalid_argument("ExternalSolverField: empty workdir");
    }
    if (!std::isfinite(timeout_seconds_) || timeout_seconds_ <= 0.0) {
        throw std::invalid_argument("ExternalSolverField: timeout must be positive");
    }
}

Vector2 ExternalSolverField::evaluate(Point2 p) const {
    const Point2 pts[1] = {p};
    return evaluate_batch(pts)[0];
}

std::vector<Vector2> ExternalSolverField::evaluate_batch(std::span<const Point2> points) const {
    if (points.empty()) return {};

    std::lock_guard lock(run_mutex_);

    std::error_code ec;
    fs::create_directories(workdir_, ec);
    if (ec) {
        throw AdapterError("cannot create workdir '" + workdir_ + "': " + ec.message());
    }

    const fs::path in_path = fs::path(workdir_) / "points_in.csv";
    const fs::path out_path = fs::path(workdir_) / "displacements_out.csv";
    fs::remove(out_path, ec);  // stale output must not satisfy this batch

    {
        std::ofstream in_file(in_path);
        if (!in_file) {
            throw AdapterError("cannot write '" + in_path.string() + "'");
        }
        std::vector<std::array<double, 2>> rows;
        rows.reserve(points.size());
        for (const Point2& p : points) {
            rows.push_back({p.x, p.y});
        }
        detail::write_two_column_csv(in_file, "x,y", rows);
        if (!in_file.flush()) {
            throw AdapterError("failed writing '" + in_path.string() + "'");
        }
    }

    const std::string command = substitute_workdir(command_, workdir_);
    const CommandResult run = run_command(command, timeout_seconds_);
    if (run.timed_out) {
        throw AdapterError("external solver timed out after " +
                           format_double(timeout_seconds_) + "s: " + command +
                           "\ncaptured output:\n" + trim_for_message(run.output));
    }
    if (run.exit_status != 0) {
        throw AdapterError("external solver failed with status " +
                           std::to_string(run.exit_status) + ": " + command +
                           "\ncaptured output:\n" + trim_for_message(run.output));
    }

    std::ifstream out_file(out_path);
    if (!out_file) {
        throw AdapterError("external solver produced no '" + out_path.string() +
                           "'\ncaptured output:\n" + trim_for_message(run.output));
    }
    std::vector<Vector2> displacements;
    try {
        displacements = read_displacements(out_file);
    } catch (const ParseError& e) {
        throw AdapterError("cannot parse '" + out_path.string() + "': " + e.what() +
                           "\ncaptured output:\n" + trim_for_message(run.output));
    }
    if (displacements.size() != points.size()) {
        throw AdapterError("row count mismatch in '" + out_path.string() + "': expected " +
                           std::to_string(points.size()) + " rows, got " +
                           std::to_string(displacements.size()) + "\ncaptured output:\n" +
                           trim_for_message(run.output));
    }
    return displacements;
}

std::vector<Vector2> read_displacements(std::istream& in) {
    const auto rows = detail::read_two_column_csv(in, "ux,uy");
    std::vector<Vector2> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        out.push_back({row[0], row[1]});
    }
    return out;
}

void write_displacements(std::span<const Vector2> displacements, std::ostream& out) {
    std::vector<std::array<double, 2>> rows;
    rows.reserve(displacements.size());
    for (const Vector2& u : displacements) {
        rows.push_back({u.dx, u.dy});
    }
    detail::write_two_column_csv(out, "ux,uy", rows);
}

}  // namespace preform
