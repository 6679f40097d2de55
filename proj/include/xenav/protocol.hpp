#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "xenav/embodiment.hpp"
#include "xenav/sim.hpp"

namespace xenav {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::chrono::milliseconds kDefaultBridgeTimeout{30000};

struct Endpoint
{
    std::string host;
    std::uint16_t port = 0;
};

/// Parses "tcp://HOST:PORT". Throws ArgumentError.
Endpoint parse_endpoint(std::string_view text);

std::string hex_encode(std::string_view bytes);
/// Throws ProtocolError on odd length or a non-hex digit.
std::string hex_decode(std::string_view hex);

// Message builders. Every message is one JSON object on one line.

nlohmann::json hello_message(std::string_view episode_id, const TaskSpec& task, const EmbodimentConfig* disclosed,
                             int width, int height);
nlohmann::json obs_message(int step, const Observation& obs, const TaskSpec& task);
nlohmann::json end_message(bool success, int steps, int collisions, double min_distance, const std::vector<double>& rewards,
                           std::string_view error);
nlohmann::json ack_message(int version = kProtocolVersion);
nlohmann::json act_message(Action a);

/// Parses one line and checks its "type". Throws ProtocolError.
nlohmann::json parse_message(std::string_view line, std::string_view expected_type);
/// Action carried by an "act" message. Throws ProtocolError.
Action parse_act(std::string_view line);
/// Images of an "obs" message, decoded back into the sensor layout.
Observation decode_obs(const nlohmann::json& msg);

/// Newline-framed byte stream over a connected socket. Every read and write
/// waits at most `timeout`; expiry throws TimeoutError.
class LineChannel
{
public:
    LineChannel() = default;
    LineChannel(int fd, std::chrono::milliseconds timeout);
    LineChannel(LineChannel&& other) noexcept;
    LineChannel& operator=(LineChannel&& other) noexcept;
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;
    ~LineChannel();

    bool is_open() const { return fd_ >= 0; }
    void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
    void send_line(std::string_view line);
    void send(const nlohmann::json& msg) { send_line(msg.dump()); }
    /// Throws IoError when the peer closes before a full line arrives.
    std::string recv_line();
    void close();

private:
    int fd_ = -1;
    std::chrono::milliseconds timeout_ = kDefaultBridgeTimeout;
    std::string buffer_;
};

/// Throws ConnectError when nothing accepts the connection.
LineChannel connect_endpoint(const Endpoint& ep, std::chrono::milliseconds timeout = kDefaultBridgeTimeout);

/// Listening socket on the loopback interface; port 0 picks a free port.
class LineServer
{
public:
    explicit LineServer(std::uint16_t port = 0);
    LineServer(const LineServer&) = delete;
    LineServer& operator=(const LineServer&) = delete;
    ~LineServer();

    std::uint16_t port() const { return port_; }
    std::string endpoint() const { return "tcp://127.0.0.1:" + std::to_string(port_); }
    /// Empty when no client arrives within the timeout.
    std::optional<LineChannel> accept(std::chrono::milliseconds timeout, std::chrono::milliseconds io_timeout =
                                                                             kDefaultBridgeTimeout);
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

/// Client side of the protocol for a fixed action, used as a reference peer:
/// acknowledges hello, answers every obs with `action` and returns after end.
/// Returns the number of obs messages answered.
int serve_constant_session(LineChannel& channel, Action action);

} // namespace xenav
