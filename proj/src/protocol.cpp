#include "xenav/protocol.hpp"

#include <cerrno>
#include <charconv>
#include <cstring>
#include <utility>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "xenav/errors.hpp"

namespace xenav {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

// Waits for `events` until the deadline. Returns false on expiry.
bool wait_fd(int fd, short events, Clock::time_point deadline)
{
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0) {
            return false;
        }
        pollfd p{fd, events, 0};
        const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
        if (r > 0) {
            return true;
        }
        if (r < 0 && errno != EINTR) {
            throw IoError("poll failed: " + errno_text());
        }
    }
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    if (c >= 'A' && c <= 'F') {
        return c - 'A' + 10;
    }
    return -1;
}

} // namespace

Endpoint parse_endpoint(std::string_view text)
{
    constexpr std::string_view scheme = "tcp://";
    if (!text.starts_with(scheme)) {
        throw ArgumentError("endpoint '" + std::string(text) + "' must look like tcp://HOST:PORT");
    }
    const std::string_view rest = text.substr(scheme.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
        throw ArgumentError("endpoint '" + std::string(text) + "' lacks a host or port");
    }
    unsigned port = 0;
    const std::string_view port_text = rest.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535) {
        throw ArgumentError("endpoint '" + std::string(text) + "' has an invalid port");
    }
    return {std::string(rest.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string hex_encode(std::string_view bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(bytes.size() * 2, '0');
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const auto b = static_cast<unsigned char>(bytes[i]);
        out[2 * i] = digits[b >> 4];
        out[2 * i + 1] = digits[b & 0xf];
    }
    return out;
}

std::string hex_decode(std::string_view hex)
{
    if (hex.size() % 2 != 0) {
        throw ProtocolError("hex payload has odd length");
    }
    std::string out(hex.size() / 2, '\0');
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = hex_value(hex[2 * i]);
        const int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw ProtocolError("hex payload holds a non-hex digit");
        }
        out[i] = static_cast<char>(hi << 4 | lo);
    }
    return out;
}

// Messages -------------------------------------------------------------------

nlohmann::json hello_message(std::string_view episode_id, const TaskSpec& task, const EmbodimentConfig* disclosed,
                             int width, int height)
{
    nlohmann::json j{{"type", "hello"},
                     {"version", kProtocolVersion},
                     {"episode", episode_id},
                     {"task",
                      {{"instruction", task.instruction()},
                       {"target_category", task.target_category},
                       {"success_distance", task.success_distance},
                       {"max_steps", task.max_steps}}},
                     {"embodiment", nullptr},
                     {"image", {{"width", width}, {"height", height}, {"encoding", "hex"}, {"layout", "u16le semantic, u16le depth"}}}};
    if (disclosed != nullptr) {
        j["embodiment"] = *disclosed;
    }
    return j;
}

nlohmann::json obs_message(int step, const Observation& obs, const TaskSpec& task)
{
    nlohmann::json images = nlohmann::json::array();
    for (const Image& img : obs.images) {
        images.push_back({{"camera", img.camera_index},
                          {"width", img.width},
                          {"height", img.height},
                          {"data", hex_encode(encode_image(img))}});
    }
    return {{"type", "obs"},
            {"step", step},
            {"images", std::move(images)},
            {"last_action_failed", obs.last_action_failed},
            {"instruction", task.instruction()}};
}

nlohmann::json end_message(bool success, int steps, int collisions, double min_distance, const std::vector<double>& rewards,
                           std::string_view error)
{
    return {{"type", "end"},
            {"success", success},
            {"metrics", {{"steps", steps}, {"collisions", collisions}, {"min_distance", min_distance}}},
            {"rewards", rewards},
            {"error", error}};
}

nlohmann::json ack_message(int version) { return {{"type", "ack"}, {"version", version}}; }

nlohmann::json act_message(Action a) { return {{"type", "act"}, {"action", action_name(a)}}; }

nlohmann::json parse_message(std::string_view line, std::string_view expected_type)
{
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ProtocolError("malformed message: " + std::string(line.substr(0, 200)));
    }
    const auto type = j.find("type");
    if (type == j.end() || !type->is_string()) {
        throw ProtocolError("message lacks a type: " + std::string(line.substr(0, 200)));
    }
    if (type->get<std::string>() != expected_type) {
        throw ProtocolError("expected a '" + std::string(expected_type) + "' message, got '" +
                            type->get<std::string>() + "'");
    }
    return j;
}

Action parse_act(std::string_view line)
{
    const nlohmann::json j = parse_message(line, "act");
    const auto it = j.find("action");
    if (it == j.end() || !it->is_string()) {
        throw ProtocolError("act message lacks an action");
    }
    const auto a = parse_action(it->get<std::string>());
    if (!a) {
        throw ProtocolError("unknown action '" + it->get<std::string>() + "'");
    }
    return *a;
}

Observation decode_obs(const nlohmann::json& msg)
{
    Observation obs;
    try {
        const auto& images = msg.at("images");
        if (!images.is_array() || images.size() != obs.images.size()) {
            throw ProtocolError("obs message must carry two images");
        }
        for (std::size_t i = 0; i < obs.images.size(); ++i) {
            const auto& im = images[i];
            obs.images[i] = decode_image(hex_decode(im.at("data").get<std::string>()), im.at("width").get<int>(),
                                         im.at("height").get<int>(), im.at("camera").get<int>());
        }
        obs.last_action_failed = msg.at("last_action_failed").get<bool>();
    } catch (const nlohmann::json::exception& err) {
        throw ProtocolError(std::string("malformed obs message: ") + err.what());
    } catch (const ParseError& err) {
        throw ProtocolError(std::string("malformed obs image: ") + err.what());
    }
    obs.rendered = true;
    return obs;
}

// Sockets --------------------------------------------------------------------

LineChannel::LineChannel(int fd, std::chrono::milliseconds timeout) : fd_(fd), timeout_(timeout) {}

LineChannel::LineChannel(LineChannel&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), timeout_(other.timeout_), buffer_(std::move(other.buffer_))
{
}

LineChannel& LineChannel::operator=(LineChannel&& other) noexcept
{
    if (this != &other) {
        close();
        fd_ = std::exchange(other.fd_, -1);
        timeout_ = other.timeout_;
        buffer_ = std::move(other.buffer_);
    }
    return *this;
}

LineChannel::~LineChannel() { close(); }

void LineChannel::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void LineChannel::send_line(std::string_view line)
{
    if (fd_ < 0) {
        throw IoError("send on a closed channel");
    }
    std::string data(line);
    data += '\n';
    const auto deadline = Clock::now() + timeout_;
    std::size_t sent = 0;
    while (sent < data.size()) {
        if (!wait_fd(fd_, POLLOUT, deadline)) {
            throw TimeoutError("peer did not accept data within " + std::to_string(timeout_.count()) + " ms");
        }
        const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) {
                continue;
            }
            throw IoError("send failed: " + errno_text());
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::string LineChannel::recv_line()
{
    if (fd_ < 0) {
        throw IoError("receive on a closed channel");
    }
    const auto deadline = Clock::now() + timeout_;
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            return line;
        }
        if (!wait_fd(fd_, POLLIN, deadline)) {
            throw TimeoutError("no message within " + std::to_string(timeout_.count()) + " ms");
        }
        char chunk[65536];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n == 0) {
            throw IoError("peer closed the connection");
        }
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) {
                continue;
            }
            throw IoError("receive failed: " + errno_text());
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

LineChannel connect_endpoint(const Endpoint& ep, std::chrono::milliseconds timeout)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw ConnectError("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
    }
    std::string last = "no address";
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) {
            last = errno_text();
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            ::freeaddrinfo(res);
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return LineChannel(fd, timeout);
        }
        last = errno_text();
        ::close(fd);
    }
    ::freeaddrinfo(res);
    throw ConnectError("cannot connect to tcp://" + ep.host + ":" + port + ": " + last);
}

LineServer::LineServer(std::uint16_t port)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) {
        throw IoError("socket failed: " + errno_text());
    }
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
        const std::string msg = errno_text();
        close();
        throw IoError("cannot listen on port " + std::to_string(port) + ": " + msg);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

LineServer::~LineServer() { close(); }

void LineServer::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::optional<LineChannel> LineServer::accept(std::chrono::milliseconds timeout, std::chrono::milliseconds io_timeout)
{
    if (fd_ < 0 || !wait_fd(fd_, POLLIN, Clock::now() + timeout)) {
        return std::nullopt;
    }
    const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
        return std::nullopt;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return LineChannel(fd, io_timeout);
}

int serve_constant_session(LineChannel& channel, Action action)
{
    const nlohmann::json hello = parse_message(channel.recv_line(), "hello");
    if (hello.value("version", 0) != kProtocolVersion) {
        throw ProtocolError("unsupported protocol version " + hello.value("version", nlohmann::json()).dump());
    }
    channel.send(ack_message());
    int answered = 0;
    for (;;) {
        const std::string line = channel.recv_line();
        const nlohmann::json msg = nlohmann::json::parse(line, nullptr, false);
        const std::string type = msg.is_object() ? msg.value("type", std::string{}) : std::string{};
        if (type == "end") {
            return answered;
        }
        if (type != "obs") {
            throw ProtocolError("unexpected message: " + line.substr(0, 200));
        }
        channel.send(act_message(action));
        ++answered;
    }
}

} // namespace xenav
