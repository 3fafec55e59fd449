import sys

from ui.cli import main as cli_main


def main():
    """
    Función principal de la aplicación.
    """
    sys.exit(cli_main())


if __name__ == '__main__':
    main()
