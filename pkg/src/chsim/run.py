from chsim.cli import cli


def main():
    cli(prog_name="chsim")


if __name__ == "__main__":
    main()
