#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "revfilt/filters.hpp"

namespace revfilt {

namespace {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct Pipe {
  Fd read;
  Fd write;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw FilterError(std::string("pipe failed: ") + std::strerror(errno));
  }
  return {Fd(fds[0]), Fd(fds[1])};
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

std::string tail(const std::string& s, std::size_t n = 2000) {
  return s.size() <= n ? s : "..." + s.substr(s.size() - n);
}

}  // namespace

std::string run_subprocess(const std::string& cmd, const std::string& stdin_data,
                           std::chrono::milliseconds timeout) {
  Pipe in = make_pipe(), out = make_pipe(), err = make_pipe();

  const pid_t pid = ::fork();
  if (pid < 0) throw FilterError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in.read.get(), STDIN_FILENO);
    ::dup2(out.write.get(), STDOUT_FILENO);
    ::dup2(err.write.get(), STDERR_FILENO);
    ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  in.read.reset();
  out.write.reset();
  err.write.reset();
  set_nonblocking(in.write.get());
  set_nonblocking(out.read.get());
  set_nonblocking(err.read.get());

  std::string stdout_data, stderr_data;
  std::size_t written = 0;
  if (stdin_data.empty()) in.write.reset();

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  bool timed_out = false;
  char buf[65536];
  while (out.read || err.read) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      break;
    }
    pollfd fds[3];
    nfds_t n = 0;
    auto add = [&](const Fd& fd, short events) {
      if (fd) fds[n++] = pollfd{fd.get(), events, 0};
    };
    add(in.write, POLLOUT);
    add(out.read, POLLIN);
    add(err.read, POLLIN);
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    const int rc = ::poll(fds, n, static_cast<int>(std::min<long long>(left + 1, 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (nfds_t i = 0; i < n; ++i) {
      if (fds[i].revents == 0) continue;
      if (in.write && fds[i].fd == in.write.get()) {
        if (fds[i].revents & (POLLERR | POLLHUP)) {
          in.write.reset();
          continue;
        }
        const ssize_t w =
            ::write(in.write.get(), stdin_data.data() + written, stdin_data.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if ((w < 0 && errno != EAGAIN) || written == stdin_data.size()) in.write.reset();
      } else {
        Fd& src = (out.read && fds[i].fd == out.read.get()) ? out.read : err.read;
        std::string& dst = (&src == &out.read) ? stdout_data : stderr_data;
        const ssize_t r = ::read(src.get(), buf, sizeof(buf));
        if (r > 0) {
          dst.append(buf, static_cast<std::size_t>(r));
        } else if (r == 0 || errno != EAGAIN) {
          src.reset();
        }
      }
    }
  }

  if (timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (timed_out) {
    throw FilterError("external filter '" + cmd + "' timed out after " +
                      std::to_string(timeout.count()) + " ms; stderr: " + tail(stderr_data));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    const std::string how = WIFEXITED(status)
                                ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                : "was killed by signal " + std::to_string(WTERMSIG(status));
    throw FilterError("external filter '" + cmd + "' " + how + "; stderr: " + tail(stderr_data));
  }
  return stdout_data;
}

BlackBoxFilter extern_filter(const std::string& cmd, ExternOptions opts) {
  if (cmd.empty()) throw FilterError("extern filter: empty command");
  // One child at a time per filter instance.
  auto mutex = std::make_shared<std::mutex>();
  return BlackBoxFilter("extern:" + cmd, [cmd, opts, mutex](const Image& x) {
    std::lock_guard lock(*mutex);
    // Writes to a closed stdin must surface as errors, not kill the process.
    ::signal(SIGPIPE, SIG_IGN);
    const std::string reply = run_subprocess(cmd, encode_pgm(x), opts.timeout);
    Image y;
    try {
      y = decode_pgm(std::span(reinterpret_cast<const unsigned char*>(reply.data()), reply.size()));
    } catch (const FormatError& e) {
      throw FilterError("external filter '" + cmd + "' produced malformed output: " + e.what());
    }
    if (!y.same_shape(x)) {
      throw FilterError("external filter '" + cmd + "' returned " + std::to_string(y.width()) +
                        "x" + std::to_string(y.height()) + " for a " +
                        std::to_string(x.width()) + "x" + std::to_string(x.height()) + " input");
    }
    return y;
  });
}

}  // namespace revfilt
